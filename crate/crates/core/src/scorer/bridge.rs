use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use super::{Scorer, ScorerError};
use crate::qa_prep::Window;
use crate::span_select::LogitSheet;

pub const DEFAULT_BRIDGE_TIMEOUT: Duration = Duration::from_secs(120);

/// Client for an external scorer process speaking newline-delimited JSON on
/// its stdin/stdout.
///
/// Requests:
/// `{"id":N,"kind":"score_window","post_id":..,"task":..,"window_index":..,"token_ids":[..]}` and
/// `{"id":N,"kind":"classify","post_id":..,"text":..}`.
/// Responses echo `id` and carry either the logit-file fields or
/// `{"id":N,"error":"..."}`. One request is in flight per session.
pub struct BridgeScorer {
    inner: Mutex<Session>,
    timeout: Duration,
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

#[derive(Deserialize)]
struct ClassResponse {
    logits: Vec<f64>,
}

impl BridgeScorer {
    /// Start `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ScorerError::Transport(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().ok_or_else(|| ScorerError::Transport("no stdout pipe".into()))?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { inner: Mutex::new(Session { child, stdin, lines: rx, next_id: 0 }), timeout })
    }

    fn request(&self, mut body: Value) -> Result<Value, ScorerError> {
        let mut session = self.inner.lock().map_err(|_| ScorerError::Transport("session poisoned".into()))?;
        session.next_id += 1;
        let id = session.next_id;
        body["id"] = json!(id);
        let stdin = session.stdin.as_mut().ok_or_else(|| ScorerError::Transport("stdin closed".into()))?;
        writeln!(stdin, "{body}")
            .and_then(|_| stdin.flush())
            .map_err(|e| ScorerError::Transport(format!("write failed: {e}")))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match session.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(ScorerError::Transport(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(ScorerError::Timeout(self.timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(ScorerError::Transport("bridge closed its output".into()))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&line)
                .map_err(|e| ScorerError::Transport(format!("unparseable response {line:?}: {e}")))?;
            // Late answers to timed-out requests are skipped.
            if value.get("id").and_then(Value::as_u64) != Some(id) {
                continue;
            }
            if let Some(err) = value.get("error") {
                let msg = err.as_str().map(str::to_owned).unwrap_or_else(|| err.to_string());
                return Err(ScorerError::Remote(msg));
            }
            return Ok(value);
        }
    }
}

impl Scorer for BridgeScorer {
    fn window_logits(&self, window: &Window) -> Result<LogitSheet, ScorerError> {
        let response = self.request(json!({
            "kind": "score_window",
            "post_id": window.post_id,
            "task": window.task,
            "window_index": window.window_index,
            "token_ids": window.token_ids,
        }))?;
        let sheet: LogitSheet = serde_json::from_value(response)
            .map_err(|e| ScorerError::Contract(format!("malformed window response: {e}")))?;
        if sheet.post_id != window.post_id || sheet.task != window.task || sheet.window_index != window.window_index {
            return Err(ScorerError::Contract(format!(
                "response for {}/{}/{} answered request for {}/{}/{}",
                sheet.post_id, sheet.task, sheet.window_index, window.post_id, window.task, window.window_index
            )));
        }
        Ok(sheet)
    }

    fn class_logits(&self, post_id: &str, input: &str) -> Result<Vec<f64>, ScorerError> {
        let response = self.request(json!({ "kind": "classify", "post_id": post_id, "text": input }))?;
        let parsed: ClassResponse = serde_json::from_value(response)
            .map_err(|e| ScorerError::Contract(format!("malformed classify response: {e}")))?;
        Ok(parsed.logits)
    }
}

impl Drop for BridgeScorer {
    fn drop(&mut self) {
        if let Ok(session) = self.inner.get_mut() {
            session.stdin.take();
            let _ = session.child.kill();
            let _ = session.child.wait();
        }
    }
}
