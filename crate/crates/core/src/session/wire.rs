//! Newline-delimited JSON messages exchanged with displays and the
//! operator console.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::state::OperatorCommand;
use super::{Condition, SeatId, N_SEATS};
use crate::error::{Error, Result};

/// Who a state message is rendered for. On the wire: the seat number, or
/// the string `"operator"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Viewer {
    Seat(SeatId),
    Operator,
}

impl Serialize for Viewer {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Viewer::Seat(n) => serializer.serialize_u64(*n as u64),
            Viewer::Operator => serializer.serialize_str("operator"),
        }
    }
}

impl<'de> Deserialize<'de> for Viewer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Viewer;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a seat number below {N_SEATS} or \"operator\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Viewer, E> {
                if (v as usize) < N_SEATS {
                    Ok(Viewer::Seat(v as usize))
                } else {
                    Err(E::custom(format!("seat {v} out of range")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Viewer, E> {
                u64::try_from(v).map_err(|_| E::custom("negative seat")).and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Viewer, E> {
                match v {
                    "operator" => Ok(Viewer::Operator),
                    other => Err(E::custom(format!("unknown viewer {other:?}"))),
                }
            }
        }
        deserializer.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatView {
    pub seat: SeatId,
    pub label: String,
    pub idle: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bpm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hist: Option<Vec<Option<f64>>>,
}

impl SeatView {
    pub fn idle(seat: SeatId, label: String) -> Self {
        SeatView { seat, label, idle: true, bpm: None, confidence: None, phase: None, hist: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub viewer: Viewer,
    pub t_ms: i64,
    pub condition: Condition,
    pub seats: Vec<SeatView>,
    /// Operator view only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schedule_position: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub game_running: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateMessage),
    Error { message: String },
    Notice { message: String },
}

impl ServerMessage {
    /// One JSON object followed by `\n`.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("server messages always serialise");
        line.push('\n');
        line
    }
}

impl From<StateMessage> for ServerMessage {
    fn from(m: StateMessage) -> Self {
        ServerMessage::State(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// First line on a raw TCP connection: which view to stream.
    Hello {
        viewer: Viewer,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    Cmd(OperatorCommand),
}

impl ClientMessage {
    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim()).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("client messages always serialise");
        line.push('\n');
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hr::HrSample;
    use crate::session::SessionState;
    use serde_json::{json, Value};

    #[test]
    fn idle_seat_has_only_marker_fields() {
        let v = serde_json::to_value(SeatView::idle(1, "Ben".into())).unwrap();
        assert_eq!(v, json!({"seat": 1, "label": "Ben", "idle": true}));
    }

    #[test]
    fn state_line_shape() {
        let mut s = SessionState::with_names(["a", "b", "c"], 0).unwrap();
        s.ingest_estimate(2, HrSample { t: 3.0, bpm: 80.0, confidence: 0.5 }).unwrap();
        let line = ServerMessage::from(s.render_state(2).unwrap()).to_line();
        assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
        assert!(line.starts_with("{\"type\":\"state\",\"viewer\":2,\"t_ms\":3000,\"condition\":\"hr_all\",\"seats\":["));
        let v: Value = serde_json::from_str(&line).unwrap();
        let me = &v["seats"][2];
        assert_eq!(me["label"], "me");
        assert_eq!(me["bpm"], 80.0);
        assert_eq!(me["hist"].as_array().unwrap().len(), 20);
        assert_eq!(me["hist"][19], 80.0);
        assert_eq!(me["hist"][0], Value::Null);
        assert!(v.get("schedule_position").is_none());
        // a seat with no data yet is idle even when visible
        assert_eq!(v["seats"][0], json!({"seat": 0, "label": "a", "idle": true}));
    }

    #[test]
    fn operator_view_fields() {
        let s = SessionState::with_names(["a", "b", "c"], 4).unwrap();
        let v: Value = serde_json::from_str(&ServerMessage::from(s.render_operator()).to_line()).unwrap();
        assert_eq!(v["viewer"], "operator");
        assert_eq!(v["schedule_position"], 0);
        assert_eq!(v["group"], 4);
        assert_eq!(v["game_running"], false);
    }

    #[test]
    fn client_commands_parse() {
        let m = ClientMessage::parse(r#"{"type":"cmd","cmd":"set_condition","condition":"hr_none"}"#).unwrap();
        assert_eq!(m, ClientMessage::Cmd(OperatorCommand::SetCondition { condition: Condition::HrNone }));
        let m = ClientMessage::parse(r#"{"type":"cmd","cmd":"set_name","seat":1,"name":"Alice"}"#).unwrap();
        assert_eq!(m, ClientMessage::Cmd(OperatorCommand::SetName { seat: 1, name: "Alice".into() }));
        for c in ["advance_schedule", "start_game", "end_game"] {
            ClientMessage::parse(&format!(r#"{{"type":"cmd","cmd":"{c}"}}"#)).unwrap();
        }
        let hello = ClientMessage::parse(r#"{"type":"hello","viewer":"operator","token":"t"}"#).unwrap();
        assert_eq!(hello, ClientMessage::Hello { viewer: Viewer::Operator, token: Some("t".into()) });
        assert_eq!(ClientMessage::parse(&hello.to_line()).unwrap(), hello);
        assert!(ClientMessage::parse(r#"{"type":"hello","viewer":3}"#).is_err());
        assert!(ClientMessage::parse(r#"{"type":"cmd","cmd":"launch"}"#).is_err());
        assert!(matches!(ClientMessage::parse("not json"), Err(Error::Parse { .. })));
    }

    #[test]
    fn error_and_notice_lines() {
        let e = ServerMessage::Error { message: "cannot change condition during a game".into() };
        assert_eq!(e.to_line(), "{\"type\":\"error\",\"message\":\"cannot change condition during a game\"}\n");
        let n = ServerMessage::Notice { message: "schedule complete".into() };
        assert_eq!(serde_json::from_str::<ServerMessage>(n.to_line().trim()).unwrap(), n);
    }
}
