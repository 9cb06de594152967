//! Wire framing: `u32` little-endian body length, then canonical JSON.

use std::io::Read;

use serde_json::{json, Map, Value};

use crate::schema::{CommandMsg, Payload};
use crate::BridgeError;

/// Largest accepted body, bytes.
pub const MAX_FRAME_BODY: usize = 16 << 20;

/// A topic-addressed, schema-tagged message.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub tick: u64,
    /// Simulated time, s.
    pub stamp: f64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(topic: impl Into<String>, tick: u64, stamp: f64, payload: Payload) -> Self {
        Self { topic: topic.into(), tick, stamp, payload }
    }

    pub fn schema(&self) -> &'static str {
        self.payload.schema()
    }

    pub fn check(&self) -> Result<(), BridgeError> {
        if self.topic.is_empty() {
            return Err(BridgeError::InvalidEnvelope("empty topic".into()));
        }
        if !self.stamp.is_finite() {
            return Err(BridgeError::InvalidEnvelope(format!("non-finite stamp on {}", self.topic)));
        }
        Ok(())
    }

    fn to_value(&self) -> Result<Value, BridgeError> {
        self.check()?;
        Ok(json!({
            "topic": self.topic,
            "schema": self.schema(),
            "tick": self.tick,
            "stamp": self.stamp,
            "payload": self.payload.to_value()?,
        }))
    }

    fn from_value(v: Value) -> Result<Self, BridgeError> {
        let mut m = into_object(v, "envelope")?;
        let schema = take_str(&mut m, "schema")?;
        let env = Envelope {
            topic: take_str(&mut m, "topic")?,
            tick: take(&mut m, "tick")?.as_u64().ok_or_else(|| malformed("tick must be an unsigned integer"))?,
            stamp: take(&mut m, "stamp")?.as_f64().ok_or_else(|| malformed("stamp must be a number"))?,
            payload: Payload::from_value(&schema, take(&mut m, "payload")?)?,
        };
        no_extra(&m, "envelope")?;
        env.check()?;
        Ok(env)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Subscribe { topics: Vec<String> },
    Publish(Envelope),
    Command(CommandMsg),
    Error { message: String },
}

impl Frame {
    pub fn kind(&self) -> &'static str {
        match self {
            Frame::Subscribe { .. } => "SUBSCRIBE",
            Frame::Publish(_) => "PUBLISH",
            Frame::Command(_) => "COMMAND",
            Frame::Error { .. } => "ERROR",
        }
    }

    fn to_value(&self) -> Result<Value, BridgeError> {
        Ok(match self {
            Frame::Subscribe { topics } => json!({"type": "SUBSCRIBE", "topics": topics}),
            Frame::Publish(e) => json!({"type": "PUBLISH", "envelope": e.to_value()?}),
            Frame::Command(c) => json!({"type": "COMMAND", "agent": c.agent, "command": serde_json::to_value(&c.command).map_err(|e| malformed(&e.to_string()))?}),
            Frame::Error { message } => json!({"type": "ERROR", "message": message}),
        })
    }

    fn from_value(v: Value) -> Result<Self, BridgeError> {
        let mut m = into_object(v, "frame")?;
        let kind = take_str(&mut m, "type")?;
        let frame = match kind.as_str() {
            "SUBSCRIBE" => {
                let topics = serde_json::from_value(take(&mut m, "topics")?).map_err(|e| malformed(&format!("topics: {e}")))?;
                Frame::Subscribe { topics }
            }
            "PUBLISH" => Frame::Publish(Envelope::from_value(take(&mut m, "envelope")?)?),
            "COMMAND" => {
                let agent = take_str(&mut m, "agent")?;
                let command = serde_json::from_value(take(&mut m, "command")?).map_err(|e| malformed(&format!("command: {e}")))?;
                Frame::Command(CommandMsg { agent, command })
            }
            "ERROR" => Frame::Error { message: take_str(&mut m, "message")? },
            other => return Err(malformed(&format!("unknown frame type {other:?}"))),
        };
        no_extra(&m, kind.as_str())?;
        Ok(frame)
    }
}

fn malformed(msg: &str) -> BridgeError {
    BridgeError::Malformed(msg.to_string())
}

fn into_object(v: Value, what: &str) -> Result<Map<String, Value>, BridgeError> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(malformed(&format!("{what} must be a JSON object"))),
    }
}

fn take(m: &mut Map<String, Value>, key: &str) -> Result<Value, BridgeError> {
    m.remove(key).ok_or_else(|| malformed(&format!("missing field {key:?}")))
}

fn take_str(m: &mut Map<String, Value>, key: &str) -> Result<String, BridgeError> {
    match take(m, key)? {
        Value::String(s) => Ok(s),
        _ => Err(malformed(&format!("{key:?} must be a string"))),
    }
}

fn no_extra(m: &Map<String, Value>, what: &str) -> Result<(), BridgeError> {
    match m.keys().next() {
        Some(k) => Err(malformed(&format!("unknown field {k:?} in {what}"))),
        None => Ok(()),
    }
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, BridgeError> {
    // serde_json's default map is ordered by key, so this is canonical.
    let body = serde_json::to_vec(&frame.to_value()?).map_err(|e| malformed(&e.to_string()))?;
    if body.len() > MAX_FRAME_BODY {
        return Err(BridgeError::FrameTooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes the frame at the start of `buf`, returning it and the bytes used.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), BridgeError> {
    let len = body_len(buf)?;
    let body = buf.get(4..4 + len).ok_or(BridgeError::Truncated { needed: 4 + len, available: buf.len() })?;
    let v: Value = serde_json::from_slice(body).map_err(|e| malformed(&e.to_string()))?;
    Ok((Frame::from_value(v)?, 4 + len))
}

fn body_len(buf: &[u8]) -> Result<usize, BridgeError> {
    let head: [u8; 4] = buf.get(..4).and_then(|h| h.try_into().ok()).ok_or(BridgeError::Truncated { needed: 4, available: buf.len() })?;
    let len = u32::from_le_bytes(head) as usize;
    if len > MAX_FRAME_BODY {
        return Err(BridgeError::FrameTooLarge(len));
    }
    Ok(len)
}

/// One PUBLISH frame.
pub fn encode(envelope: &Envelope) -> Result<Vec<u8>, BridgeError> {
    encode_frame(&Frame::Publish(envelope.clone()))
}

/// Decodes a buffer holding exactly one PUBLISH frame.
pub fn decode(buf: &[u8]) -> Result<Envelope, BridgeError> {
    let (frame, used) = decode_frame(buf)?;
    if used != buf.len() {
        return Err(malformed(&format!("{} trailing bytes after frame", buf.len() - used)));
    }
    match frame {
        Frame::Publish(e) => Ok(e),
        other => Err(BridgeError::UnexpectedFrame(other.kind())),
    }
}

/// Blocking read of one frame. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, BridgeError> {
    let mut head = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut head[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(BridgeError::Truncated { needed: 4, available: got }),
            n => got += n,
        }
    }
    let len = body_len(&head)?;
    let mut body = vec![0u8; len];
    let mut got = 0;
    while got < len {
        match r.read(&mut body[got..])? {
            0 => return Err(BridgeError::Truncated { needed: 4 + len, available: 4 + got }),
            n => got += n,
        }
    }
    let v: Value = serde_json::from_slice(&body).map_err(|e| malformed(&e.to_string()))?;
    Frame::from_value(v).map(Some)
}
