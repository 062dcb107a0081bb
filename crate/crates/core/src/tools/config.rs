use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ToolMode {
    #[default]
    Builtin,
    External,
}

/// One tool action: how to run it and how long to wait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionConfig {
    pub mode: ToolMode,
    /// Command line with `{src}`, `{tb}` and `{out}` placeholders.
    pub argv: Vec<String>,
    pub timeout_s: f64,
}

impl ActionConfig {
    fn with_timeout(timeout_s: f64) -> Self {
        ActionConfig {
            mode: ToolMode::Builtin,
            argv: Vec::new(),
            timeout_s,
        }
    }
}

impl Default for ActionConfig {
    fn default() -> Self {
        ActionConfig::with_timeout(30.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsConfig {
    pub compile: ActionConfig,
    pub lint: ActionConfig,
    pub simulate: ActionConfig,
    pub formal: ActionConfig,
    /// Root under which per-invocation workspaces are created.
    pub run_root: Option<PathBuf>,
    /// Use the built-in implementation when an external binary is missing.
    pub fallback_to_builtin: bool,
}

impl Default for ToolsConfig {
    fn default() -> Self {
        ToolsConfig {
            compile: ActionConfig::with_timeout(30.0),
            lint: ActionConfig::with_timeout(30.0),
            simulate: ActionConfig::with_timeout(120.0),
            formal: ActionConfig::with_timeout(120.0),
            run_root: None,
            fallback_to_builtin: true,
        }
    }
}

pub const RUN_ROOT_ENV: &str = "HDLFORGE_RUN_ROOT";

impl ToolsConfig {
    /// `HDLFORGE_RUN_ROOT`, then the configured root, then a directory under
    /// the system temp dir.
    pub fn resolved_run_root(&self) -> PathBuf {
        if let Some(p) = std::env::var_os(RUN_ROOT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.run_root
            .clone()
            .unwrap_or_else(|| std::env::temp_dir().join("hdlforge-runs"))
    }
}
