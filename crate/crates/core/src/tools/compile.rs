use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::config::{ActionConfig, ToolMode, ToolsConfig};
use super::process::{expand_argv, run_external, ExitKind, ToolResult};
use super::Job;
use crate::rtl::{parse_module, RtlModule, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub severity: Severity,
    pub line: Option<usize>,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompileReport {
    pub built: bool,
    pub messages: Vec<Message>,
    pub tool: ToolResult,
    /// The elaborated module when the built-in front end accepts the source.
    #[serde(skip)]
    pub module: Option<RtlModule>,
}

impl CompileReport {
    pub fn first_error(&self) -> Option<&Message> {
        self.messages.iter().find(|m| m.severity == Severity::Error)
    }
}

pub fn compile(candidate: &SourceUnit, cfg: &ToolsConfig, job: &Job) -> CompileReport {
    match cfg.compile.mode {
        ToolMode::Builtin => compile_builtin(candidate),
        ToolMode::External => {
            let ext = compile_external(candidate, cfg, &cfg.compile, job);
            if ext.tool.exit_kind == ExitKind::NotInstalled && cfg.fallback_to_builtin {
                let mut b = compile_builtin(candidate);
                b.tool.exit_kind = ExitKind::NotInstalled;
                b.messages.push(Message {
                    severity: Severity::Info,
                    line: None,
                    text: "external compiler not installed; used built-in front end".into(),
                });
                return b;
            }
            ext
        }
    }
}

pub fn compile_builtin(candidate: &SourceUnit) -> CompileReport {
    let start = Instant::now();
    let parsed = parse_module(candidate);
    let elapsed = start.elapsed().as_secs_f64();
    match parsed {
        Ok(m) => CompileReport {
            built: true,
            messages: Vec::new(),
            tool: ToolResult::builtin(true, elapsed),
            module: Some(m),
        },
        Err(e) => CompileReport {
            built: false,
            messages: vec![Message {
                severity: Severity::Error,
                line: e.line(),
                text: e.to_string(),
            }],
            tool: ToolResult::builtin(false, elapsed),
            module: None,
        },
    }
}

fn compile_external(
    candidate: &SourceUnit,
    cfg: &ToolsConfig,
    action: &ActionConfig,
    job: &Job,
) -> CompileReport {
    let tool = match job.prepare(cfg, candidate.text(), None) {
        Ok(ws) => {
            let argv = expand_argv(&action.argv, &ws.src, &ws.tb, &ws.out);
            run_external(&argv, &ws.dir, action.timeout_s)
        }
        Err(e) => ToolResult {
            ok: false,
            exit_kind: ExitKind::ToolError,
            stdout_digest: e.to_string(),
            elapsed: 0.0,
            workspace: None,
        },
    };
    let mut messages = parse_tool_messages(&tool.stdout_digest);
    let built = tool.ok;
    if !built && !messages.iter().any(|m| m.severity == Severity::Error) {
        let text = match tool.exit_kind {
            ExitKind::Timeout => format!("compiler timed out after {} s", action.timeout_s),
            ExitKind::NotInstalled => "compiler not installed".to_string(),
            _ => "compiler reported failure".to_string(),
        };
        messages.push(Message {
            severity: Severity::Error,
            line: None,
            text,
        });
    }
    // Later stages still need the elaborated form for the interpreter.
    let module = if built {
        parse_module(candidate).ok()
    } else {
        None
    };
    CompileReport {
        built,
        messages,
        tool,
        module,
    }
}

/// Extracts `file:line:` diagnostics in the styles used by common Verilog
/// tools (`%Error: a.v:3:5: ...`, `a.v:3: syntax error`).
pub fn parse_tool_messages(output: &str) -> Vec<Message> {
    let re = Regex::new(r"^(%?[A-Za-z][\w-]*:\s*)?[^\s:]+\.s?vh?:(\d+):(?:\d+:)?\s*(.*)$")
        .expect("valid regex");
    output
        .lines()
        .filter_map(|l| {
            let c = re.captures(l.trim())?;
            let head = c.get(1).map(|m| m.as_str()).unwrap_or("");
            let text = c.get(3).map(|m| m.as_str()).unwrap_or("").to_string();
            let lower = format!("{head}{text}").to_ascii_lowercase();
            let severity = if lower.contains("warning") {
                Severity::Warning
            } else if lower.contains("info") || lower.contains("note") {
                Severity::Info
            } else {
                Severity::Error
            };
            Some(Message {
                severity,
                line: c[2].parse().ok(),
                text,
            })
        })
        .collect()
}
