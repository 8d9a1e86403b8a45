//! JSON messages exchanged between the tour server and a viewer.
//!
//! Every message is one JSON text of the form
//! `{"type": <kind>, "payload": {...}}`. Unknown payload fields are ignored.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::ProjectedFrame;
use crate::render::ColorMap;
use crate::sage::{ParamPatch, SageParams};

/// Significant digits kept for streamed point coordinates.
pub const WIRE_DIGITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum TourMessage {
    Hello(Hello),
    Frame(FrameMessage),
    SetParams(ParamPatch),
    Playback(Playback),
    Reseed(Reseed),
    Error(ErrorMessage),
}

/// Parameter state echoed with every frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireParams {
    pub gamma: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub half_range: f64,
    pub p_eff: f64,
    /// Set when `p_eff < 2`.
    pub inverted: bool,
}

impl From<&SageParams> for WireParams {
    fn from(p: &SageParams) -> Self {
        WireParams {
            gamma: p.gamma(),
            radius: p.radius(),
            half_range: p.half_range(),
            p_eff: p.effective_dim(),
            inverted: p.is_inverted(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub n: usize,
    pub p: usize,
    pub column_names: Vec<String>,
    pub has_labels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub colors: ColorMap,
    pub params: WireParams,
    pub seed: u64,
    pub fps: f64,
    pub step_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub frame_index: u64,
    /// p rows of `[a1, a2]`, full precision.
    pub basis: Vec<[f64; 2]>,
    /// Canvas coordinates rounded to [`WIRE_DIGITS`] significant digits.
    pub points: Vec<[f64; 2]>,
    pub params: WireParams,
}

impl From<&ProjectedFrame> for FrameMessage {
    fn from(f: &ProjectedFrame) -> Self {
        let b = f.basis.basis();
        FrameMessage {
            frame_index: f.frame_index,
            basis: (0..b.nrows()).map(|i| [b[(i, 0)], b[(i, 1)]]).collect(),
            points: f.coords.iter().map(|&[x, y]| [round_sig(x), round_sig(y)]).collect(),
            params: WireParams::from(&f.params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Playback {
    Pause,
    Play,
    /// Frames per second.
    Rate { fps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reseed {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl TourMessage {
    pub fn error(reason: impl Into<String>) -> Self {
        TourMessage::Error(ErrorMessage { reason: reason.into(), field: None })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

/// Requests a client may send.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClientCommand {
    SetParams(ParamPatch),
    Playback(Playback),
    Reseed(u64),
}

/// Parses a client text message; the error string is suitable for an
/// `error` reply.
pub fn parse_client_message(text: &str) -> Result<ClientCommand, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| "message has no string \"type\" field".to_string())?
        .to_string();
    match kind.as_str() {
        "set_params" | "playback" | "reseed" => {}
        "hello" | "frame" | "error" => return Err(format!("{kind:?} messages are sent by the server only")),
        other => return Err(format!("unknown message type {other:?}")),
    }
    let msg: TourMessage = serde_json::from_value(value).map_err(|e| format!("invalid {kind} payload: {e}"))?;
    Ok(match msg {
        TourMessage::SetParams(p) => ClientCommand::SetParams(p),
        TourMessage::Playback(p) => ClientCommand::Playback(p),
        TourMessage::Reseed(r) => ClientCommand::Reseed(r.seed),
        _ => unreachable!("kind checked above"),
    })
}

/// Rounds to [`WIRE_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", WIRE_DIGITS - 1, x).parse().unwrap_or(x)
}
