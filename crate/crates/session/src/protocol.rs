//! Wire messages. Every message is one JSON text frame with a `type` field;
//! docs/protocol.md has the field-by-field schema.

use playlearn_core::session::{ControlInput, Mode, TickFrame};
use playlearn_core::WorldState;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        #[serde(default)]
        client: Option<String>,
    },
    /// Opens a session for this connection, replacing any previous one.
    Start {
        /// Preset name or scenario file in the data directory.
        #[serde(default)]
        scenario: Option<String>,
        #[serde(default)]
        hz: Option<f64>,
        #[serde(default)]
        stream_hz: Option<f64>,
        /// Wall-clock speed-up; simulated time per tick stays 1/hz.
        #[serde(default)]
        speed: Option<f64>,
    },
    Input(ControlInput),
    RecordStart,
    RecordStop {
        #[serde(default)]
        file: Option<String>,
    },
    /// Script text inline or a file in the data directory.
    LoadScript {
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        file: Option<String>,
    },
    /// Runs the loaded script, or replays a dataset file when given one.
    Run {
        #[serde(default)]
        dataset: Option<String>,
    },
    Stop,
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::Start { .. } => "start",
            ClientMessage::Input(_) => "input",
            ClientMessage::RecordStart => "record_start",
            ClientMessage::RecordStop { .. } => "record_stop",
            ClientMessage::LoadScript { .. } => "load_script",
            ClientMessage::Run { .. } => "run",
            ClientMessage::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        scenarios: Vec<String>,
    },
    Start {
        session: u64,
        scenario: String,
        hz: f64,
        stream_hz: f64,
        world: WorldState,
    },
    Tick(TickFrame),
    Input {
        tick: u64,
    },
    RecordStart {
        tick: u64,
    },
    RecordStop {
        file: String,
        samples: usize,
    },
    LoadScript {
        leaves: Vec<String>,
        branches: Vec<String>,
    },
    Run {
        mode: Mode,
        tick: u64,
    },
    Stop {
        tick: u64,
    },
    Error {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request: Option<String>,
    },
}

impl ServerMessage {
    pub fn error(message: impl ToString, request: Option<&str>) -> Self {
        ServerMessage::Error {
            message: message.to_string(),
            request: request.map(str::to_owned),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_is_flat() {
        let m: ClientMessage = serde_json::from_str(
            r#"{"type":"input","drive":{"x":1.0,"y":0.0},"turn":0.5,"arm_request":"wave"}"#,
        )
        .unwrap();
        let ClientMessage::Input(i) = m else { panic!() };
        assert_eq!(i.turn, 0.5);
        assert_eq!(i.head, 0.0);
        assert_eq!(i.arm_request, playlearn_core::session::ArmRequest::Wave);
    }

    #[test]
    fn unit_messages_need_only_a_type() {
        for (text, kind) in [
            (r#"{"type":"record_start"}"#, "record_start"),
            (r#"{"type":"stop"}"#, "stop"),
            (r#"{"type":"run"}"#, "run"),
            (r#"{"type":"start"}"#, "start"),
        ] {
            let m: ClientMessage = serde_json::from_str(text).unwrap();
            assert_eq!(m.kind(), kind);
        }
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"fly"}"#).is_err());
    }

    #[test]
    fn errors_carry_the_request_kind() {
        let text = serde_json::to_string(&ServerMessage::error("boom", Some("run"))).unwrap();
        assert_eq!(text, r#"{"type":"error","message":"boom","request":"run"}"#);
    }
}
