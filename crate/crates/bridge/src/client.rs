//! Minimal blocking client, used by tests and tools.

use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use mariner_core::dynamics::ControlCommand;

use crate::codec::{decode_frame, encode_frame, Frame};
use crate::schema::CommandMsg;
use crate::BridgeError;

pub struct BridgeClient {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl BridgeClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, buf: Vec::new() })
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), BridgeError> {
        self.stream.write_all(&encode_frame(frame)?)?;
        Ok(())
    }

    /// Writes raw bytes, for exercising protocol errors.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), BridgeError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    pub fn subscribe(&mut self, topics: &[&str]) -> Result<(), BridgeError> {
        self.send(&Frame::Subscribe { topics: topics.iter().map(|t| t.to_string()).collect() })
    }

    pub fn send_command(&mut self, agent: &str, command: ControlCommand) -> Result<(), BridgeError> {
        self.send(&Frame::Command(CommandMsg { agent: agent.to_string(), command }))
    }

    /// Next frame, or `Ok(None)` if none arrives within `timeout`.
    /// A closed connection is [`BridgeError::Closed`].
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Frame>, BridgeError> {
        let deadline = Instant::now() + timeout;
        let mut chunk = [0u8; 65536];
        loop {
            match decode_frame(&self.buf) {
                Ok((frame, used)) => {
                    self.buf.drain(..used);
                    return Ok(Some(frame));
                }
                Err(BridgeError::Truncated { .. }) => {}
                Err(e) => return Err(e),
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut chunk) {
                Ok(0) => return Err(BridgeError::Closed),
                Ok(n) => self.buf.extend_from_slice(&chunk[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
    }
}
