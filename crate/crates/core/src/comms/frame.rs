//! Wire format.
//!
//! ```text
//! +----------------------+--------------------------------------+
//! | length N (4 bytes)   | N bytes of UTF-8 JSON envelope       |
//! | big-endian u32       | {version,msg_type,correlation_id,    |
//! |                      |  payload}                            |
//! +----------------------+--------------------------------------+
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt};

use crate::model::{CanonicalQuery, CanonicalResult, CanonicalSchema};

pub const PROTOCOL_VERSION: u32 = 1;

/// Largest envelope accepted in either direction (64 MiB).
pub const MAX_FRAME_LEN: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_LEN} byte limit")]
    PayloadTooLarge(usize),
    #[error("truncated frame: expected {expected} bytes, got {actual}")]
    TruncatedFrame { expected: usize, actual: usize },
    #[error("malformed envelope: {0}")]
    MalformedJson(String),
    #[error("unknown message type `{0}`")]
    UnknownMsgType(String),
    #[error("protocol version {0} is not supported")]
    VersionMismatch(u64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl FrameError {
    pub fn code(&self) -> &'static str {
        match self {
            FrameError::PayloadTooLarge(_) => "payload-too-large",
            FrameError::TruncatedFrame { .. } => "truncated-frame",
            FrameError::MalformedJson(_) => "malformed-json",
            FrameError::UnknownMsgType(_) => "unknown-msg-type",
            FrameError::VersionMismatch(_) => "version-mismatch",
            FrameError::Io(_) => "transport-failure",
        }
    }
}

/// 128-bit request identifier, rendered as 32 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorrelationId(pub u128);

impl CorrelationId {
    pub fn random() -> Self {
        CorrelationId(rand::random())
    }
}

impl fmt::Display for CorrelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for CorrelationId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("correlation id `{s}` is not 32 hex digits"));
        }
        u128::from_str_radix(s, 16)
            .map(CorrelationId)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentType {
    Mask,
    Mediator,
    Wrapper,
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentType::Mask => "mask",
            ComponentType::Mediator => "mediator",
            ComponentType::Wrapper => "wrapper",
        })
    }
}

/// Sender identity carried by HELLO and HELLO_ACK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub component_type: ComponentType,
    pub node_id: String,
}

/// Structured error returned by a peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub detail: String,
    /// Component the error is attributed to, when not the responder itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
}

impl ErrorPayload {
    pub fn new(code: impl Into<String>, detail: impl Into<String>) -> Self {
        ErrorPayload {
            code: code.into(),
            detail: detail.into(),
            component: None,
        }
    }

    pub fn attributed(mut self, component: impl Into<String>) -> Self {
        self.component = Some(component.into());
        self
    }
}

impl fmt::Display for ErrorPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.component {
            Some(c) => write!(f, "{} (from {c}): {}", self.code, self.detail),
            None => write!(f, "{}: {}", self.code, self.detail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgType {
    SchemaReq,
    SchemaRes,
    QueryReq,
    QueryRes,
    Error,
    Hello,
    HelloAck,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::SchemaReq,
        MsgType::SchemaRes,
        MsgType::QueryReq,
        MsgType::QueryRes,
        MsgType::Error,
        MsgType::Hello,
        MsgType::HelloAck,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MsgType::SchemaReq => "SCHEMA_REQ",
            MsgType::SchemaRes => "SCHEMA_RES",
            MsgType::QueryReq => "QUERY_REQ",
            MsgType::QueryRes => "QUERY_RES",
            MsgType::Error => "ERROR",
            MsgType::Hello => "HELLO",
            MsgType::HelloAck => "HELLO_ACK",
        }
    }

    pub fn parse(s: &str) -> Option<MsgType> {
        MsgType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    SchemaReq,
    SchemaRes(CanonicalSchema),
    QueryReq(CanonicalQuery),
    QueryRes(CanonicalResult),
    Error(ErrorPayload),
    Hello(Hello),
    HelloAck(Hello),
}

impl Body {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Body::SchemaReq => MsgType::SchemaReq,
            Body::SchemaRes(_) => MsgType::SchemaRes,
            Body::QueryReq(_) => MsgType::QueryReq,
            Body::QueryRes(_) => MsgType::QueryRes,
            Body::Error(_) => MsgType::Error,
            Body::Hello(_) => MsgType::Hello,
            Body::HelloAck(_) => MsgType::HelloAck,
        }
    }

    fn payload(&self) -> Result<Json, serde_json::Error> {
        match self {
            Body::SchemaReq => Ok(Json::Object(Default::default())),
            Body::SchemaRes(s) => serde_json::to_value(s),
            Body::QueryReq(q) => serde_json::to_value(q),
            Body::QueryRes(r) => serde_json::to_value(r),
            Body::Error(e) => serde_json::to_value(e),
            Body::Hello(h) | Body::HelloAck(h) => serde_json::to_value(h),
        }
    }

    fn from_payload(msg_type: MsgType, payload: Json) -> Result<Body, serde_json::Error> {
        Ok(match msg_type {
            MsgType::SchemaReq => Body::SchemaReq,
            MsgType::SchemaRes => Body::SchemaRes(serde_json::from_value(payload)?),
            MsgType::QueryReq => Body::QueryReq(serde_json::from_value(payload)?),
            MsgType::QueryRes => Body::QueryRes(serde_json::from_value(payload)?),
            MsgType::Error => Body::Error(serde_json::from_value(payload)?),
            MsgType::Hello => Body::Hello(serde_json::from_value(payload)?),
            MsgType::HelloAck => Body::HelloAck(serde_json::from_value(payload)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub version: u32,
    pub correlation_id: CorrelationId,
    pub body: Body,
}

impl Message {
    pub fn new(correlation_id: CorrelationId, body: Body) -> Self {
        Message {
            version: PROTOCOL_VERSION,
            correlation_id,
            body,
        }
    }

    /// Builds the reply to `self` carrying the same correlation id.
    pub fn reply(&self, body: Body) -> Message {
        Message::new(self.correlation_id, body)
    }

    pub fn msg_type(&self) -> MsgType {
        self.body.msg_type()
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u64,
    msg_type: String,
    correlation_id: String,
    #[serde(default)]
    payload: Json,
}

pub fn encode_message(msg: &Message) -> Result<Vec<u8>, FrameError> {
    let envelope = Envelope {
        version: msg.version as u64,
        msg_type: msg.msg_type().as_str().to_string(),
        correlation_id: msg.correlation_id.to_string(),
        payload: msg
            .body
            .payload()
            .map_err(|e| FrameError::MalformedJson(e.to_string()))?,
    };
    let json = serde_json::to_vec(&envelope).map_err(|e| FrameError::MalformedJson(e.to_string()))?;
    if json.len() > MAX_FRAME_LEN {
        return Err(FrameError::PayloadTooLarge(json.len()));
    }
    let mut frame = Vec::with_capacity(4 + json.len());
    frame.extend_from_slice(&(json.len() as u32).to_be_bytes());
    frame.extend_from_slice(&json);
    Ok(frame)
}

/// Decodes exactly one frame.
pub fn decode_message(bytes: &[u8]) -> Result<Message, FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::TruncatedFrame {
            expected: 4,
            actual: bytes.len(),
        });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::PayloadTooLarge(len));
    }
    let body = &bytes[4..];
    if body.len() < len {
        return Err(FrameError::TruncatedFrame {
            expected: len,
            actual: body.len(),
        });
    }
    if body.len() > len {
        return Err(FrameError::MalformedJson(format!(
            "{} trailing bytes after frame",
            body.len() - len
        )));
    }
    decode_envelope(body)
}

fn decode_envelope(json: &[u8]) -> Result<Message, FrameError> {
    let envelope: Envelope = serde_json::from_slice(json).map_err(|e| FrameError::MalformedJson(e.to_string()))?;
    if envelope.version != PROTOCOL_VERSION as u64 {
        return Err(FrameError::VersionMismatch(envelope.version));
    }
    let msg_type = MsgType::parse(&envelope.msg_type).ok_or(FrameError::UnknownMsgType(envelope.msg_type))?;
    let correlation_id = envelope.correlation_id.parse().map_err(FrameError::MalformedJson)?;
    let body = Body::from_payload(msg_type, envelope.payload).map_err(|e| FrameError::MalformedJson(e.to_string()))?;
    Ok(Message {
        version: PROTOCOL_VERSION,
        correlation_id,
        body,
    })
}

/// Reads one frame from a stream. `Ok(None)` on clean end of stream at a
/// frame boundary.
pub async fn read_frame<R: AsyncRead + Unpin>(reader: &mut R) -> Result<Option<Message>, FrameError> {
    let mut prefix = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = reader.read(&mut prefix[filled..]).await?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(FrameError::TruncatedFrame {
                expected: 4,
                actual: filled,
            });
        }
        filled += n;
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::PayloadTooLarge(len));
    }
    let mut json = vec![0u8; len];
    let mut got = 0;
    while got < len {
        let n = reader.read(&mut json[got..]).await?;
        if n == 0 {
            return Err(FrameError::TruncatedFrame {
                expected: len,
                actual: got,
            });
        }
        got += n;
    }
    decode_envelope(&json).map(Some)
}
