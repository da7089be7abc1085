//! Out-of-process predictor speaking a line-based stdio protocol.
//!
//! Per batch the parent writes `PREDICT <rows> <cols>` followed by `rows`
//! lines of `cols` space-separated floats; the child answers with exactly
//! `rows` lines holding one float each. `QUIT` ends the session.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::{Predictor, PredictorKind};
use crate::error::{Error, Result};
use crate::geometry::PointSet;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

pub struct ExternalPredictor {
    command: String,
    timeout: Duration,
    // None once the child has failed; later calls report that.
    session: Mutex<Option<Session>>,
}

pub fn external_predictor(command: &str) -> Result<ExternalPredictor> {
    ExternalPredictor::spawn(command, DEFAULT_TIMEOUT)
}

impl ExternalPredictor {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::PredictorIo(format!("cannot start '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            timeout,
            session: Mutex::new(Some(Session { child, stdin, lines: rx })),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn exchange(&self, session: &mut Session, x: &PointSet) -> Result<Vec<f64>> {
        let fail = |what: String| Error::PredictorIo(format!("'{}': {what}", self.command));
        let mut msg = format!("PREDICT {} {}\n", x.len(), x.dim());
        for row in x.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    msg.push(' ');
                }
                write!(msg, "{v:.16e}").unwrap();
            }
            msg.push('\n');
        }
        session
            .stdin
            .write_all(msg.as_bytes())
            .and_then(|_| session.stdin.flush())
            .map_err(|e| fail(format!("writing request failed: {e}")))?;

        let deadline = Instant::now() + self.timeout;
        let mut out = Vec::with_capacity(x.len());
        while out.len() < x.len() {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match session.lines.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(fail(format!("reading reply failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(fail(format!(
                        "timed out after {:?} with {} of {} replies",
                        self.timeout,
                        out.len(),
                        x.len()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let status = session
                        .child
                        .try_wait()
                        .ok()
                        .flatten()
                        .map_or("closed its output".to_string(), |s| format!("exited ({s})"));
                    return Err(fail(format!("child {status} after {} of {} replies", out.len(), x.len())));
                }
            };
            let v: f64 =
                line.trim().parse().map_err(|_| fail(format!("malformed reply line {}: {line:?}", out.len() + 1)))?;
            out.push(v);
        }
        Ok(out)
    }
}

impl Predictor for ExternalPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::External
    }

    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn predict_batch(&self, x: &PointSet) -> Result<Vec<f64>> {
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let Some(session) = guard.as_mut() else {
            return Err(Error::PredictorIo(format!("'{}' is unusable after an earlier failure", self.command)));
        };
        if x.is_empty() {
            return Ok(Vec::new());
        }
        match self.exchange(session, x) {
            Ok(v) => Ok(v),
            Err(e) => {
                if let Some(mut s) = guard.take() {
                    let _ = s.child.kill();
                    let _ = s.child.wait();
                }
                Err(e)
            }
        }
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let slot = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        if let Some(mut s) = slot.take() {
            let _ = s.stdin.write_all(b"QUIT\n").and_then(|_| s.stdin.flush());
            drop(s.stdin);
            let deadline = Instant::now() + Duration::from_secs(1);
            loop {
                match s.child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                    _ => {
                        let _ = s.child.kill();
                        let _ = s.child.wait();
                        break;
                    }
                }
            }
        }
    }
}
