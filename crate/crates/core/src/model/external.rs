use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use ndarray::{Array1, ArrayView2};

use super::ModelOracle;
use crate::error::{Result, VineError};
use crate::scalar::Scalar;

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Model served by a resident child process.
///
/// Wire protocol, per call: the batch is written to the child's stdin as R
/// lines of comma-separated decimals followed by one empty line; the child
/// answers with exactly R lines on stdout, one decimal each.
pub struct ExternalOracle {
    command: String,
    feature_count: usize,
    timeout: Duration,
    io: Mutex<ChildIo>,
}

struct ChildIo {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<std::io::Result<String>>,
}

impl ExternalOracle {
    /// Launches `command` through `sh -c`.
    pub fn spawn(command: &str, feature_count: usize) -> Result<Self> {
        Self::spawn_with_timeout(command, feature_count, DEFAULT_TIMEOUT)
    }

    /// As [`ExternalOracle::spawn`], treating a reply that takes longer than
    /// `timeout` as a protocol violation.
    pub fn spawn_with_timeout(command: &str, feature_count: usize, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| VineError::ProcessSpawnFailure {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalOracle {
            command: command.to_string(),
            feature_count,
            timeout,
            io: Mutex::new(ChildIo {
                child,
                stdin,
                lines: rx,
            }),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }
}

impl<T: Scalar> ModelOracle<T> for ExternalOracle {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_batch(&self, batch: ArrayView2<'_, T>) -> Result<Array1<T>> {
        let mut io = self.io.lock().unwrap_or_else(|e| e.into_inner());
        let io = &mut *io;
        // anything still queued is output nobody asked for
        match io.lines.try_recv() {
            Ok(Ok(extra)) => {
                return Err(VineError::ProtocolViolation(format!(
                    "unsolicited output from model process: `{extra}`"
                )))
            }
            Ok(Err(e)) => return Err(e.into()),
            Err(_) => {}
        }

        let stdin = io.stdin.as_mut().ok_or(VineError::ChildExited)?;
        let mut request = String::new();
        for row in batch.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    request.push(',');
                }
                request.push_str(&v.to_string());
            }
            request.push('\n');
        }
        request.push('\n');
        if stdin.write_all(request.as_bytes()).and_then(|_| stdin.flush()).is_err() {
            io.stdin = None;
            return Err(VineError::ChildExited);
        }

        let expected = batch.nrows();
        let mut out = Vec::with_capacity(expected);
        while out.len() < expected {
            match io.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => {
                    let value = line
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| VineError::ProtocolViolation(format!("non-numeric response line `{line}`")))?;
                    out.push(T::lit(value));
                }
                Ok(Err(e)) => return Err(e.into()),
                Err(RecvTimeoutError::Disconnected) if out.is_empty() => {
                    io.stdin = None;
                    return Err(VineError::ChildExited);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    io.stdin = None;
                    return Err(VineError::ProtocolViolation(format!(
                        "model process exited after {} of {expected} predictions",
                        out.len()
                    )));
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(VineError::ProtocolViolation(format!(
                        "received {} of {expected} predictions before timeout",
                        out.len()
                    )))
                }
            }
        }
        Ok(Array1::from(out))
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let io = self.io.get_mut().unwrap_or_else(|e| e.into_inner());
        io.stdin = None;
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}
