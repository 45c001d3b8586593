//! The ticking owner of one session. Requests queue on a channel and are
//! handled between ticks; frames go out through a watch channel so a slow
//! reader only ever misses frames.

use std::sync::Arc;
use std::time::Duration;

use playlearn_core::session::{ControlInput, Session, SessionError, TickFrame, TreeOutline};
use playlearn_core::{Dataset, PrimitiveRegistry, Scenario};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::MissedTickBehavior;

pub enum Request {
    Input(ControlInput),
    RecordStart,
    RecordStop,
    LoadScript(String),
    Run,
    Replay(Dataset),
    Stop,
}

pub enum Reply {
    Ticks(u64),
    Recorded(Dataset),
    Loaded(TreeOutline),
    Failed(SessionError),
}

type Envelope = (Request, oneshot::Sender<Reply>);

/// Client side of a running session task. Dropping it ends the task.
pub struct SessionHandle {
    requests: mpsc::Sender<Envelope>,
    pub frames: watch::Receiver<Option<TickFrame>>,
}

impl SessionHandle {
    pub fn spawn(session: Session, registry: Arc<PrimitiveRegistry>, speed: f64) -> Self {
        let (requests, rx) = mpsc::channel(64);
        let (tx, frames) = watch::channel(None);
        let period = Duration::from_secs_f64(1.0 / (session.hz() * speed));
        tokio::spawn(tick_loop(session, registry, period, rx, tx));
        Self { requests, frames }
    }

    pub async fn call(&self, req: Request) -> Reply {
        let (tx, rx) = oneshot::channel();
        if self.requests.send((req, tx)).await.is_err() {
            return Reply::Failed(SessionError::Sim("session ended".into()));
        }
        rx.await
            .unwrap_or_else(|_| Reply::Failed(SessionError::Sim("session ended".into())))
    }
}

fn handle(session: &mut Session, registry: &PrimitiveRegistry, req: Request) -> Reply {
    let ticks = |s: &Session| Reply::Ticks(s.ticks());
    let result = match req {
        Request::Input(i) => session.apply_input(i).map(|_| ticks(session)),
        Request::RecordStart => session.start_recording().map(|_| ticks(session)),
        Request::RecordStop => session.finish_recording().map(Reply::Recorded),
        Request::LoadScript(text) => session.load_script(&text, registry).map(Reply::Loaded),
        Request::Run => session.run_script().map(|_| ticks(session)),
        Request::Replay(ds) => session.start_replay(ds).map(|_| ticks(session)),
        Request::Stop => {
            session.stop();
            Ok(ticks(session))
        }
    };
    result.unwrap_or_else(Reply::Failed)
}

async fn tick_loop(
    mut session: Session,
    registry: Arc<PrimitiveRegistry>,
    period: Duration,
    mut rx: mpsc::Receiver<Envelope>,
    frames: watch::Sender<Option<TickFrame>>,
) {
    let mut clock = tokio::time::interval(period);
    clock.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            biased;
            req = rx.recv() => {
                let Some((req, reply)) = req else { break };
                let _ = reply.send(handle(&mut session, &registry, req));
            }
            _ = clock.tick() => {
                if let Some(frame) = session.step() {
                    frames.send_replace(Some(frame));
                }
            }
        }
    }
    tracing::debug!(ticks = session.ticks(), "session closed");
}

/// Scenario lookup by preset name.
pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "corridor" => Some(Scenario::corridor()),
        "pass_by" => Some(Scenario::pass_by()),
        "leave_return" => Some(Scenario::leave_return()),
        _ => None,
    }
}

pub const PRESETS: [&str; 3] = ["corridor", "pass_by", "leave_return"];
