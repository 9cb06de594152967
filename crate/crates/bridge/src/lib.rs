//! Pub/sub bridge between the simulation tick loop and external clients.
//!
//! Wire format: each frame is a `u32` little-endian body length followed by a
//! UTF-8 JSON object with keys in sorted order. Frame types are `SUBSCRIBE`,
//! `PUBLISH`, `COMMAND` and `ERROR`; published envelopes carry a schema tag
//! from the static [`schema::registry`].

pub mod client;
pub mod codec;
pub mod golden;
pub mod schema;
pub mod server;

use thiserror::Error;

pub use client::BridgeClient;
pub use codec::{decode, decode_frame, encode, encode_frame, read_frame, Envelope, Frame};
pub use schema::{lookup, registry, schema_docs, CommandMsg, Payload, StateMsg};
pub use server::{BridgeServer, Diagnostics, ServerConfig};

use mariner_core::sim::Frame as TickFrame;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("frame body of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown schema {0:?}")]
    UnknownSchema(String),
    #[error("unsupported schema version {0:?}")]
    UnsupportedVersion(String),
    #[error("expected a PUBLISH frame, got {0}")]
    UnexpectedFrame(&'static str),
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("tick went backwards on {topic}: {got} after {last}")]
    NonMonotoneTick { topic: String, last: u64, got: u64 },
    #[error("bridge is closed")]
    Closed,
}

/// Topic glob: `*` matches any run of characters (including `/`), `?` one.
pub fn glob_match(pattern: &str, topic: &str) -> bool {
    let (p, t): (Vec<char>, Vec<char>) = (pattern.chars().collect(), topic.chars().collect());
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

pub fn state_topic(agent: &str) -> String {
    format!("{agent}/state")
}

pub fn sensor_topic(agent: &str, sensor: &str) -> String {
    format!("{agent}/{sensor}")
}

/// Envelopes for one tick: each agent's state, then sensor readings in
/// (agent, sensor) order.
pub fn tick_envelopes(frame: &TickFrame) -> Vec<Envelope> {
    let states = frame
        .agents
        .iter()
        .map(|a| Envelope::new(state_topic(&a.name), frame.tick, frame.time, Payload::State(StateMsg::new(&a.state, a.current))));
    let readings = frame
        .readings
        .iter()
        .map(|r| Envelope::new(sensor_topic(&r.agent, &r.sensor), frame.tick, frame.time, Payload::from(r.reading.clone())));
    states.chain(readings).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn globs() {
        assert!(glob_match("*", "auv0/echo"));
        assert!(glob_match("auv0/*", "auv0/echo"));
        assert!(!glob_match("auv0/*", "auv1/echo"));
        assert!(glob_match("auv?/depth", "auv7/depth"));
        assert!(!glob_match("auv?/depth", "auv10/depth"));
        assert!(glob_match("*/state", "a/b/state"));
        assert!(glob_match("a*b*c", "aXXbYYc"));
        assert!(!glob_match("a*b*c", "aXXbYY"));
        assert!(glob_match("exact", "exact"));
        assert!(!glob_match("", "x"));
    }
}
