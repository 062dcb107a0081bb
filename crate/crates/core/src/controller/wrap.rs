//! Black-box Stage-A generators driven over a line-delimited JSON protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::budget_signal;

pub const ADAPTER_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterProtocolError {
    #[error("cannot start adapter: {0}")]
    Spawn(String),
    #[error("adapter closed its output")]
    Closed,
    #[error("adapter i/o error: {0}")]
    Io(String),
    #[error("malformed adapter response ({why}): {payload}")]
    Malformed { payload: String, why: String },
}

/// One line on the adapter's stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub schema: u32,
    pub task_id: String,
    pub spec: String,
    pub header: String,
    /// 1-based Stage-A attempt number.
    pub attempt: usize,
    /// One-line summary of the previous attempt's failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
}

/// One line on the adapter's stdout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterResponse {
    pub source: String,
    /// The pipeline's own verdict on the official testbench.
    #[serde(default)]
    pub passed: Option<bool>,
    #[serde(default)]
    pub budget_exhausted: Option<bool>,
    #[serde(default)]
    pub budget_used: Option<usize>,
    #[serde(default)]
    pub budget_total: Option<usize>,
    /// Whether the pipeline's own failure tracing fired.
    #[serde(default)]
    pub trace_fired: Option<bool>,
    /// Generation time the adapter wants charged, in seconds.
    #[serde(default)]
    pub elapsed_s: Option<f64>,
}

impl AdapterResponse {
    pub fn parse(line: &str) -> Result<Self, AdapterProtocolError> {
        serde_json::from_str(line.trim()).map_err(|e| AdapterProtocolError::Malformed {
            payload: line.trim_end().to_string(),
            why: e.to_string(),
        })
    }

    /// `s_budget` from the adapter's own counters when reported, else from
    /// the controller's attempt count.
    pub fn budget_signal(&self, attempts_used: usize, r: usize) -> f64 {
        if self.budget_exhausted == Some(true) {
            return 0.0;
        }
        match (self.budget_used, self.budget_total) {
            (Some(u), Some(t)) if t >= 1 => budget_signal(u.min(t), t),
            _ => budget_signal(attempts_used, r),
        }
    }

    /// `s_trace` when the adapter reports whether its tracing fired.
    pub fn trace_override(&self) -> Option<f64> {
        self.trace_fired.map(|f| if f { 1.0 } else { 0.5 })
    }
}

/// A Stage-A generator the controller can call but not inspect.
pub trait StageAAdapter {
    fn identity(&self) -> String;
    fn produce(&mut self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterProtocolError>;
}

/// Runs an executable once and exchanges one request/response line pair per
/// attempt.
pub struct ProcessAdapter {
    argv: Vec<String>,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessAdapter {
    pub fn spawn(argv: &[String]) -> Result<Self, AdapterProtocolError> {
        let (prog, args) = argv
            .split_first()
            .ok_or_else(|| AdapterProtocolError::Spawn("empty adapter command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterProtocolError::Spawn(format!("{prog}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ProcessAdapter {
            argv: argv.to_vec(),
            child,
            stdin,
            stdout,
        })
    }
}

impl StageAAdapter for ProcessAdapter {
    fn identity(&self) -> String {
        format!("process:{}", self.argv.join(" "))
    }

    fn produce(&mut self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterProtocolError> {
        let line = serde_json::to_string(req).expect("request serializes");
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| AdapterProtocolError::Io(e.to_string()))?;
        let mut resp = String::new();
        let n = self
            .stdout
            .read_line(&mut resp)
            .map_err(|e| AdapterProtocolError::Io(e.to_string()))?;
        if n == 0 {
            return Err(AdapterProtocolError::Closed);
        }
        AdapterResponse::parse(&resp)
    }
}

impl Drop for ProcessAdapter {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Replays a fixed list of responses; the last one repeats.
#[derive(Debug, Clone)]
pub struct ScriptedAdapter {
    pub responses: Vec<AdapterResponse>,
    calls: usize,
}

impl ScriptedAdapter {
    pub fn new(responses: Vec<AdapterResponse>) -> Self {
        assert!(!responses.is_empty(), "scripted adapter needs a response");
        ScriptedAdapter {
            responses,
            calls: 0,
        }
    }
}

impl StageAAdapter for ScriptedAdapter {
    fn identity(&self) -> String {
        "scripted-adapter".into()
    }

    fn produce(&mut self, _req: &AdapterRequest) -> Result<AdapterResponse, AdapterProtocolError> {
        let r = self.responses[self.calls.min(self.responses.len() - 1)].clone();
        self.calls += 1;
        Ok(r)
    }
}
