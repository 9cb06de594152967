//! Golden frame corpus: one encoded frame per registered schema plus one of
//! each client-facing frame type. External client implementations replay
//! these to check they decode exactly what the server emits.

use std::path::Path;

use mariner_core::dynamics::ControlCommand;

use crate::codec::{encode_frame, Envelope, Frame};
use crate::schema::{registry, CommandMsg};
use crate::BridgeError;

/// `(file name, frame bytes)` in a fixed order.
pub fn golden_frames() -> Result<Vec<(String, Vec<u8>)>, BridgeError> {
    let mut out = Vec::new();
    for (i, e) in registry().iter().enumerate() {
        let env = Envelope::new(format!("auv0/{}", e.family.to_lowercase()), 100 + i as u64, 3.5 + i as f64 / 30.0, e.example());
        out.push((format!("publish_{}.bin", e.family), encode_frame(&Frame::Publish(env))?));
    }
    out.push(("subscribe.bin".into(), encode_frame(&Frame::Subscribe { topics: vec!["auv0/*".into(), "*/state".into()] })?));
    let cmd = CommandMsg { agent: "auv0".into(), command: ControlCommand::Direct { fin_commands: vec![0.1, -0.1, 0.0, 0.0], prop_speed: 20.0 } };
    out.push(("command.bin".into(), encode_frame(&Frame::Command(cmd))?));
    out.push(("error.bin".into(), encode_frame(&Frame::Error { message: "clients may not send PUBLISH frames".into() })?));
    Ok(out)
}

/// Writes the corpus into `dir`, returning the file names.
pub fn write_golden(dir: &Path) -> Result<Vec<String>, BridgeError> {
    std::fs::create_dir_all(dir)?;
    let frames = golden_frames()?;
    for (name, bytes) in &frames {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(frames.into_iter().map(|(n, _)| n).collect())
}
