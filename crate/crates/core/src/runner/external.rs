//! Child-process trackers speaking the line protocol over stdin/stdout:
//!
//! ```text
//! hello                      -> trek-client 1 <name>
//! init <ref> <x> <y> <w> <h> -> ok
//! frame <ref>                -> box <x> <y> <w> <h> [conf]
//! quit                       (client exits 0)
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::{FrameInfo, Prediction, Tracker};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const CLIENT_BANNER: &str = "trek-client";
pub const PROTOCOL_VERSION: u32 = 1;

const EXIT_GRACE: Duration = Duration::from_secs(5);

pub struct ExternalTracker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    client_name: String,
    finished: bool,
}

fn protocol_error(message: impl Into<String>) -> Error {
    Error::Tracker(message.into())
}

fn parse_field(raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| protocol_error(format!("malformed number {raw:?} in client response")))
}

/// Parses `box <x> <y> <w> <h> [conf]`.
pub(crate) fn parse_box_line(line: &str) -> Result<Prediction> {
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.first() != Some(&"box") || !(5..=6).contains(&fields.len()) {
        return Err(protocol_error(format!("expected `box x y w h [conf]`, got {line:?}")));
    }
    let v = fields[1..5]
        .iter()
        .map(|f| parse_field(f))
        .collect::<Result<Vec<_>>>()?;
    let bbox = BoundingBox::new(v[0], v[1], v[2], v[3])
        .map_err(|e| protocol_error(format!("invalid box {line:?}: {e}")))?;
    let confidence = fields.get(5).map(|f| parse_field(f)).transpose()?;
    Ok(Prediction { bbox, confidence })
}

fn check_token(frame_ref: &str) -> Result<()> {
    if frame_ref.is_empty() || frame_ref.chars().any(char::is_whitespace) {
        return Err(protocol_error(format!(
            "frame reference {frame_ref:?} cannot be sent as a single token"
        )));
    }
    Ok(())
}

impl ExternalTracker {
    /// Spawns `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| protocol_error(format!("cannot spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut tracker = Self {
            child,
            stdin,
            lines: rx,
            timeout,
            client_name: String::new(),
            finished: false,
        };
        tracker.handshake()?;
        Ok(tracker)
    }

    pub fn client_name(&self) -> &str {
        &self.client_name
    }

    fn handshake(&mut self) -> Result<()> {
        let reply = self.exchange("hello")?;
        let mut parts = reply.splitn(3, ' ');
        let banner = parts.next();
        let version = parts.next();
        let name = parts.next().unwrap_or("");
        if banner != Some(CLIENT_BANNER) {
            return Err(protocol_error(format!("bad handshake {reply:?}")));
        }
        if version != Some(&PROTOCOL_VERSION.to_string()[..]) {
            return Err(protocol_error(format!(
                "protocol version mismatch: client sent {reply:?}, harness speaks {PROTOCOL_VERSION}"
            )));
        }
        if name.is_empty() {
            return Err(protocol_error("handshake without client name"));
        }
        self.client_name = name.to_string();
        Ok(())
    }

    fn send(&mut self, line: &str) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| protocol_error("client input already closed"))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| protocol_error(format!("client input closed: {e}")))
    }

    fn receive(&mut self) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(protocol_error(format!("reading client output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(protocol_error(format!(
                "no response within {:.1} s",
                self.timeout.as_secs_f64()
            ))),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().ok();
                Err(protocol_error(format!(
                    "client exited mid-session ({})",
                    status.map_or_else(|| "unknown status".to_string(), |s| s.to_string())
                )))
            }
        }
    }

    fn exchange(&mut self, line: &str) -> Result<String> {
        self.send(line)?;
        self.receive()
    }

    fn wait_exit(&mut self) -> Result<()> {
        let deadline = Instant::now() + EXIT_GRACE;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => {
                    return Err(protocol_error(format!("client exited with {status} after quit")))
                }
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                Ok(None) => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return Err(protocol_error("client did not exit after quit"));
                }
                Err(e) => return Err(protocol_error(format!("waiting for client: {e}"))),
            }
        }
    }
}

impl Tracker for ExternalTracker {
    fn init(&mut self, frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        check_token(&frame.frame_ref)?;
        let reply = self.exchange(&format!(
            "init {} {} {} {} {}",
            frame.frame_ref, bbox.x, bbox.y, bbox.w, bbox.h
        ))?;
        if reply != "ok" {
            return Err(protocol_error(format!("expected `ok` after init, got {reply:?}")));
        }
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        check_token(&frame.frame_ref)?;
        let reply = self.exchange(&format!("frame {}", frame.frame_ref))?;
        parse_box_line(&reply)
    }

    fn finish(&mut self) -> Result<()> {
        self.finished = true;
        self.send("quit")?;
        self.stdin = None;
        self.wait_exit()
    }
}

impl Drop for ExternalTracker {
    fn drop(&mut self) {
        if !self.finished {
            let _ = self.send("quit");
            self.stdin = None;
        }
        if matches!(self.child.try_wait(), Ok(None)) {
            let deadline = Instant::now() + Duration::from_millis(200);
            while Instant::now() < deadline && matches!(self.child.try_wait(), Ok(None)) {
                thread::sleep(Duration::from_millis(5));
            }
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}
