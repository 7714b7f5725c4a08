//! JSON text messages exchanged over `/ws`.
//!
//! Outbound: `{"v":1,"type":"state",...}` after every step and
//! `{"type":"error","msg":...}` in reply to a bad command. Inbound:
//! `{"type":"set_pref","lambda":[a,b]}`, `{"type":"reset"}`,
//! `{"type":"pause"}`, `{"type":"resume"}`, `{"type":"set_speed","speed":x}`.

use pcmorl_core::preference::{clamp_simplex, PreferenceVector};
use serde::{Deserialize, Serialize};

/// Schema version carried by every state frame.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepMetrics {
    pub task_r: f64,
    pub obj1_r: f64,
    pub obj2_r: f64,
    pub energy: f64,
    pub stride: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeFlags {
    pub done: bool,
    pub success: bool,
}

/// Snapshot broadcast after each simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    /// Steps taken in the current episode, this one included.
    pub t: usize,
    pub sim_time: f64,
    /// Preference seen by the policy when it chose this step's action.
    pub lambda_applied: [f64; 2],
    /// Upright: `[θ, θ̇, τ]`. Glide: `[p_x, p_y, v_x, v_y, contact_x,
    /// contact_y, disturbed]`.
    pub env_state: Vec<f64>,
    pub step_metrics: StepMetrics,
    pub episode_flags: EpisodeFlags,
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Outbound {
    State(StateFrame),
    Error { msg: String },
}

/// Inbound command after validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClientCommand {
    SetPref(PreferenceVector),
    Reset,
    Pause,
    Resume,
    SetSpeed(f64),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RawCommand {
    SetPref { lambda: [f64; 2] },
    Reset,
    Pause,
    Resume,
    SetSpeed { speed: f64 },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
}

pub fn encode_frame(frame: &StateFrame) -> String {
    let msg = Versioned {
        v: PROTOCOL_VERSION,
        body: Outbound::State(frame.clone()),
    };
    serde_json::to_string(&msg).expect("state frames serialize")
}

/// Parses a message produced by [`encode_frame`].
pub fn decode_frame(text: &str) -> Result<StateFrame, ProtocolError> {
    let msg: Versioned<Outbound> =
        serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if msg.v != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(msg.v));
    }
    match msg.body {
        Outbound::State(f) => Ok(f),
        Outbound::Error { msg } => Err(ProtocolError::Malformed(format!("error message: {msg}"))),
    }
}

pub fn encode_error(msg: &str) -> String {
    serde_json::to_string(&Outbound::Error { msg: msg.to_string() }).expect("error messages serialize")
}

/// Parses and validates an inbound command. Preferences pass through
/// `clamp_simplex`; speeds must be positive and finite.
pub fn parse_command(text: &str) -> Result<ClientCommand, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let kind = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| ProtocolError::Malformed("missing string field `type`".into()))?;
    if !["set_pref", "reset", "pause", "resume", "set_speed"].contains(&kind) {
        return Err(ProtocolError::UnknownType(kind.to_string()));
    }
    let raw: RawCommand = serde_json::from_value(value).map_err(|e| ProtocolError::InvalidPayload(e.to_string()))?;
    Ok(match raw {
        RawCommand::SetPref { lambda } => {
            ClientCommand::SetPref(clamp_simplex(lambda).map_err(|e| ProtocolError::InvalidPayload(e.to_string()))?)
        }
        RawCommand::Reset => ClientCommand::Reset,
        RawCommand::Pause => ClientCommand::Pause,
        RawCommand::Resume => ClientCommand::Resume,
        RawCommand::SetSpeed { speed } => {
            if !(speed.is_finite() && speed > 0.0) {
                return Err(ProtocolError::InvalidPayload(format!("speed must be positive, got {speed}")));
            }
            ClientCommand::SetSpeed(speed)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> StateFrame {
        StateFrame {
            t: 12,
            sim_time: 0.24,
            lambda_applied: [0.3, 0.7],
            env_state: vec![0.1, -2.5, 1.75],
            step_metrics: StepMetrics {
                task_r: 0.995,
                obj1_r: -0.0312,
                obj2_r: 0.0,
                energy: 0.0875,
                stride: 0.0,
                deviation: 0.0,
            },
            episode_flags: EpisodeFlags {
                done: false,
                success: false,
            },
        }
    }

    #[test]
    fn frame_round_trip() {
        let f = frame();
        let text = encode_frame(&f);
        assert!(text.starts_with(r#"{"v":1,"type":"state","#), "{text}");
        assert_eq!(decode_frame(&text).unwrap(), f);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = encode_frame(&frame()).replacen(r#""v":1"#, r#""v":2"#, 1);
        assert_eq!(decode_frame(&text), Err(ProtocolError::Version(2)));
    }

    #[test]
    fn commands_parse() {
        assert_eq!(
            parse_command(r#"{"type":"set_pref","lambda":[0.3,0.7]}"#).unwrap(),
            ClientCommand::SetPref(PreferenceVector::new(0.3, 0.7).unwrap())
        );
        assert_eq!(
            parse_command(r#"{"type":"set_pref","lambda":[-1,3]}"#).unwrap(),
            ClientCommand::SetPref(PreferenceVector::new(0.0, 1.0).unwrap())
        );
        assert_eq!(parse_command(r#"{"type":"reset"}"#).unwrap(), ClientCommand::Reset);
        assert_eq!(parse_command(r#"{"type":"pause"}"#).unwrap(), ClientCommand::Pause);
        assert_eq!(parse_command(r#"{"type":"resume"}"#).unwrap(), ClientCommand::Resume);
        assert_eq!(parse_command(r#"{"type":"set_speed","speed":0.5}"#).unwrap(), ClientCommand::SetSpeed(0.5));
    }

    #[test]
    fn bad_commands_are_classified() {
        assert_eq!(parse_command(r#"{"type":"jump"}"#), Err(ProtocolError::UnknownType("jump".into())));
        assert!(matches!(parse_command("not json"), Err(ProtocolError::Malformed(_))));
        assert!(matches!(parse_command(r#"{"lambda":[1,0]}"#), Err(ProtocolError::Malformed(_))));
        assert!(matches!(parse_command(r#"{"type":"set_pref"}"#), Err(ProtocolError::InvalidPayload(_))));
        assert!(matches!(
            parse_command(r#"{"type":"set_speed","speed":0}"#),
            Err(ProtocolError::InvalidPayload(_))
        ));
    }

    #[test]
    fn error_reply_shape() {
        let v: serde_json::Value = serde_json::from_str(&encode_error("unknown message type `jump`")).unwrap();
        assert_eq!(v["type"], "error");
        assert_eq!(v["msg"], "unknown message type `jump`");
    }
}
