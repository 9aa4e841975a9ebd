use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, OnceLock};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use serde_json::Value;

use super::protocol::{self, Request, RequestBody};
use super::{LayeredEmbeddings, Model, ModelInfo, PredictionVector};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

type Pending = Arc<Mutex<HashMap<u64, Sender<Value>>>>;

/// A model living in a child process.
///
/// Writes are serialized through one lock; a reader thread routes each
/// reply to the caller waiting on its id, so requests may be pipelined and
/// replies may arrive in any order.
pub struct ExternalModel {
    command: String,
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Pending,
    alive: Arc<AtomicBool>,
    next_id: AtomicU64,
    timeout: Duration,
    info: OnceLock<ModelInfo>,
    reader: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .finish_non_exhaustive()
    }
}

impl ExternalModel {
    /// Starts `command_line` (split with shell quoting rules).
    pub fn spawn(command_line: &str) -> Result<Self> {
        let argv = shlex::split(command_line)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::BadConfig(format!("cannot parse command `{command_line}`")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ModelUnavailable(format!("failed to start `{command_line}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending: Pending = Arc::default();
        let alive = Arc::new(AtomicBool::new(true));
        let reader = {
            let pending = Arc::clone(&pending);
            let alive = Arc::clone(&alive);
            thread::Builder::new()
                .name("model-reader".into())
                .spawn(move || read_replies(BufReader::new(stdout), &pending, &alive))?
        };

        Ok(Self {
            command: command_line.to_string(),
            child: Mutex::new(child),
            stdin: Mutex::new(Some(stdin)),
            pending,
            alive,
            next_id: AtomicU64::new(1),
            timeout: DEFAULT_TIMEOUT,
            info: OnceLock::new(),
            reader: Some(reader),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn unavailable(&self, why: &str) -> Error {
        Error::ModelUnavailable(format!("`{}`: {why}", self.command))
    }

    fn send(&self, body: RequestBody) -> Result<Receiver<Value>> {
        if !self.alive.load(Ordering::SeqCst) {
            return Err(self.unavailable("process has exited"));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(id, tx);

        let line = serde_json::to_string(&Request { id, body }).expect("request serializes");
        let mut guard = self.stdin.lock().unwrap();
        let result = match guard.as_mut() {
            Some(stdin) => writeln!(stdin, "{line}").and_then(|()| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        drop(guard);
        if let Err(e) = result {
            self.pending.lock().unwrap().remove(&id);
            return Err(self.unavailable(&format!("write failed: {e}")));
        }
        debug!("sent request {id} to `{}`", self.command);
        Ok(rx)
    }

    fn wait(&self, rx: &Receiver<Value>) -> Result<Value> {
        match rx.recv_timeout(self.timeout) {
            Ok(v) => Ok(v),
            Err(RecvTimeoutError::Timeout) => Err(self.unavailable("timed out waiting for reply")),
            Err(RecvTimeoutError::Disconnected) => Err(self.unavailable("process has exited")),
        }
    }

    fn call(&self, body: RequestBody) -> Result<Value> {
        let rx = self.send(body)?;
        self.wait(&rx)
    }
}

fn read_replies<R: BufRead>(reader: R, pending: &Pending, alive: &AtomicBool) {
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                warn!("dropping unparseable model reply ({e}): {line}");
                continue;
            }
        };
        let Some(id) = protocol::reply_id(&value) else {
            warn!("dropping model reply without id: {line}");
            continue;
        };
        match pending.lock().unwrap().remove(&id) {
            Some(tx) => {
                let _ = tx.send(value);
            }
            None => warn!("dropping model reply with unknown id {id}"),
        }
    }
    alive.store(false, Ordering::SeqCst);
    // Dropping the senders wakes every waiter with a disconnect.
    pending.lock().unwrap().clear();
}

impl Model for ExternalModel {
    fn info(&self) -> Result<ModelInfo> {
        if let Some(info) = self.info.get() {
            return Ok(info.clone());
        }
        let info = protocol::decode_info(self.call(RequestBody::Info)?)?;
        Ok(self.info.get_or_init(|| info).clone())
    }

    fn predict(&self, text: &str) -> Result<PredictionVector> {
        let classes = self.info()?.num_classes();
        let reply = self.call(RequestBody::Predict {
            text: text.to_string(),
        })?;
        protocol::decode_predict(reply, Some(classes))
    }

    /// Pipelines every request before collecting replies.
    fn predict_batch(&self, texts: &[String]) -> Result<Vec<PredictionVector>> {
        let classes = self.info()?.num_classes();
        let receivers = texts
            .iter()
            .map(|t| self.send(RequestBody::Predict { text: t.clone() }))
            .collect::<Result<Vec<_>>>()?;
        receivers
            .iter()
            .map(|rx| protocol::decode_predict(self.wait(rx)?, Some(classes)))
            .collect()
    }

    fn embed(&self, text: &str) -> Result<LayeredEmbeddings> {
        let reply = self.call(RequestBody::Embed {
            text: text.to_string(),
        })?;
        protocol::decode_embed(reply)
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved adapter exit on its own.
        self.stdin.lock().unwrap().take();
        let mut child = self.child.lock().unwrap();
        for _ in 0..50 {
            if matches!(child.try_wait(), Ok(Some(_))) {
                break;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = child.kill();
        let _ = child.wait();
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}
