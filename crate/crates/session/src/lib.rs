//! Hosts live sessions over WebSocket (`/ws`) and serves the data directory
//! over plain HTTP (`/files/{name}`).

mod host;
pub mod protocol;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use playlearn_core::session::{Mode, Session};
use playlearn_core::{Dataset, PrimitiveRegistry, Scenario};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

pub use host::{preset, Reply, Request, SessionHandle, PRESETS};
pub use protocol::{ClientMessage, ServerMessage, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub scenario: Scenario,
    pub hz: f64,
    pub stream_hz: f64,
    /// Recordings, scripts and scenario files live here.
    pub data_dir: PathBuf,
    pub registry: PrimitiveRegistry,
}

impl ServerConfig {
    pub fn new(scenario: Scenario, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            hz: 50.0,
            stream_hz: 20.0,
            data_dir: data_dir.into(),
            registry: PrimitiveRegistry::pepper(),
        }
    }
}

struct AppState {
    config: ServerConfig,
    registry: Arc<PrimitiveRegistry>,
    next_id: AtomicU64,
}

pub fn router(config: ServerConfig) -> Router {
    let state = Arc::new(AppState {
        registry: Arc::new(config.registry.clone()),
        config,
        next_id: AtomicU64::new(1),
    });
    Router::new()
        .route("/ws", get(upgrade))
        .route("/files/{name}", get(get_file).put(put_file))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

/// Plain file names only: no separators, no leading dot.
fn file_path(dir: &Path, name: &str) -> Option<PathBuf> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    ok.then(|| dir.join(name))
}

async fn get_file(State(st): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Response {
    let Some(path) = file_path(&st.config.data_dir, &name) else {
        return (StatusCode::BAD_REQUEST, "bad file name").into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => bytes.into_response(),
        Err(_) => (StatusCode::NOT_FOUND, "no such file").into_response(),
    }
}

async fn put_file(
    State(st): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> Response {
    let Some(path) = file_path(&st.config.data_dir, &name) else {
        return (StatusCode::BAD_REQUEST, "bad file name").into_response();
    };
    match tokio::fs::write(&path, &body).await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(st): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, st))
}

struct Live {
    id: u64,
    handle: SessionHandle,
    stream: tokio::time::Interval,
    recordings: u32,
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn connection(mut socket: WebSocket, st: Arc<AppState>) {
    let hello = ServerMessage::Hello {
        protocol: PROTOCOL_VERSION,
        scenarios: PRESETS.iter().map(|s| s.to_string()).collect(),
    };
    if !send(&mut socket, &hello).await {
        return;
    }
    let mut live: Option<Live> = None;
    loop {
        // Latest frame, at most once per stream period; pending while idle.
        let frame = async {
            match live.as_mut() {
                Some(l) => loop {
                    l.stream.tick().await;
                    if l.handle.frames.has_changed().unwrap_or(false) {
                        if let Some(f) = l.handle.frames.borrow_and_update().clone() {
                            break f;
                        }
                    }
                },
                None => std::future::pending().await,
            }
        };
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Ok(msg) => {
                        let kind = msg.kind();
                        handle_message(&st, &mut live, msg).await.unwrap_or_else(|e| ServerMessage::error(e, Some(kind)))
                    }
                    Err(e) => ServerMessage::error(format!("malformed message: {e}"), None),
                };
                if !send(&mut socket, &reply).await {
                    break;
                }
            }
            f = frame => {
                if !send(&mut socket, &ServerMessage::Tick(f)).await {
                    break;
                }
            }
        }
    }
}

fn positive(v: Option<f64>, default: f64, what: &str) -> Result<f64, String> {
    let v = v.unwrap_or(default);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{what} must be positive, got {v}"))
    }
}

async fn read_data(st: &AppState, name: &str) -> Result<String, String> {
    let path =
        file_path(&st.config.data_dir, name).ok_or_else(|| format!("bad file name `{name}`"))?;
    tokio::fs::read_to_string(&path)
        .await
        .map_err(|e| format!("{name}: {e}"))
}

async fn resolve_scenario(st: &AppState, name: Option<&str>) -> Result<Scenario, String> {
    match name {
        None => Ok(st.config.scenario.clone()),
        Some(n) => match preset(n) {
            Some(s) => Ok(s),
            None => {
                let text = read_data(st, n).await?;
                Scenario::from_toml_str(&text).map_err(|e| format!("{n}: {e}"))
            }
        },
    }
}

async fn handle_message(
    st: &AppState,
    live: &mut Option<Live>,
    msg: ClientMessage,
) -> Result<ServerMessage, String> {
    if let ClientMessage::Hello { .. } = msg {
        return Ok(ServerMessage::Hello {
            protocol: PROTOCOL_VERSION,
            scenarios: PRESETS.iter().map(|s| s.to_string()).collect(),
        });
    }
    if let ClientMessage::Start {
        scenario,
        hz,
        stream_hz,
        speed,
    } = msg
    {
        let sc = resolve_scenario(st, scenario.as_deref()).await?;
        let hz = hz.unwrap_or(st.config.hz);
        let stream_hz = positive(stream_hz, st.config.stream_hz, "stream_hz")?;
        let speed = positive(speed, 1.0, "speed")?;
        let session = Session::new(sc.clone(), hz).map_err(|e| e.to_string())?;
        let world = *session.world();
        let id = st.next_id.fetch_add(1, Ordering::Relaxed);
        let mut stream =
            tokio::time::interval(Duration::from_secs_f64(1.0 / (stream_hz.min(hz) * speed)));
        stream.set_missed_tick_behavior(MissedTickBehavior::Skip);
        *live = Some(Live {
            id,
            handle: SessionHandle::spawn(session, st.registry.clone(), speed),
            stream,
            recordings: 0,
        });
        return Ok(ServerMessage::Start {
            session: id,
            scenario: sc.name,
            hz,
            stream_hz,
            world,
        });
    }

    let l = live.as_mut().ok_or("no session; send `start` first")?;
    let mut record_file = None;
    let req = match msg {
        ClientMessage::Input(i) => Request::Input(i),
        ClientMessage::RecordStart => Request::RecordStart,
        ClientMessage::RecordStop { file } => {
            l.recordings += 1;
            let name = file.unwrap_or_else(|| format!("demo-{}-{}.jsonl", l.id, l.recordings));
            file_path(&st.config.data_dir, &name)
                .ok_or_else(|| format!("bad file name `{name}`"))?;
            record_file = Some(name);
            Request::RecordStop
        }
        ClientMessage::LoadScript { text, file } => {
            let text = match (text, file) {
                (Some(t), None) => t,
                (None, Some(f)) => read_data(st, &f).await?,
                _ => return Err("load_script needs exactly one of `text` or `file`".into()),
            };
            Request::LoadScript(text)
        }
        ClientMessage::Run { dataset: Some(f) } => {
            let text = read_data(st, &f).await?;
            Request::Replay(Dataset::from_jsonl_str(&text).map_err(|e| format!("{f}: {e}"))?)
        }
        ClientMessage::Run { dataset: None } => Request::Run,
        ClientMessage::Stop => Request::Stop,
        ClientMessage::Hello { .. } | ClientMessage::Start { .. } => unreachable!("handled above"),
    };
    let kind = match &req {
        Request::Input(_) => "input",
        Request::RecordStart => "record_start",
        Request::Run => "run",
        Request::Replay(_) => "replay",
        _ => "stop",
    };
    match l.handle.call(req).await {
        Reply::Failed(e) => Err(e.to_string()),
        Reply::Recorded(ds) => {
            let name = record_file.expect("record_stop names its file");
            let path = st.config.data_dir.join(&name);
            tokio::fs::write(&path, ds.to_jsonl())
                .await
                .map_err(|e| format!("{name}: {e}"))?;
            Ok(ServerMessage::RecordStop {
                file: name,
                samples: ds.len(),
            })
        }
        Reply::Loaded(outline) => Ok(ServerMessage::LoadScript {
            leaves: outline.leaves,
            branches: outline.branches,
        }),
        Reply::Ticks(tick) => Ok(match kind {
            "input" => ServerMessage::Input { tick },
            "record_start" => ServerMessage::RecordStart { tick },
            "run" => ServerMessage::Run {
                mode: Mode::ScriptRunning,
                tick,
            },
            "replay" => ServerMessage::Run {
                mode: Mode::Replay,
                tick,
            },
            _ => ServerMessage::Stop { tick },
        }),
    }
}
