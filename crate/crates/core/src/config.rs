//! Run configuration: hyperparameters, feature switches, tool and backend
//! selection. Every field has a default, so a partial JSON file is valid.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::tools::ToolsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Phase durations come from [`VirtualCosts`]; logs are reproducible.
    #[default]
    Virtual,
    Wall,
}

/// Simulated seconds charged per action under [`ClockMode::Virtual`].
/// Backend calls use the scripted latency when one is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirtualCosts {
    pub plan_call: f64,
    pub coder_call: f64,
    pub reflexion_call: f64,
    pub stage_b_call: f64,
    pub compile: f64,
    pub lint: f64,
    pub smoke_test: f64,
    pub official_sim: f64,
    pub formal: f64,
}

impl Default for VirtualCosts {
    fn default() -> Self {
        VirtualCosts {
            plan_call: 2.0,
            coder_call: 4.0,
            reflexion_call: 3.0,
            stage_b_call: 20.0,
            compile: 0.2,
            lint: 0.1,
            smoke_test: 0.05,
            official_sim: 0.5,
            formal: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// Canned responses from the task's `script.json`.
    #[default]
    Scripted,
    /// Chat-completion endpoint from `HDLFORGE_API_URL`.
    HttpChat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Model name for Stage A roles (planner, coder, reflexion).
    pub stage_a_model: String,
    pub stage_b_model: String,
    /// Overrides the task's `script.json` for the scripted backend.
    pub script: Option<PathBuf>,
    pub timeout_s: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            stage_a_model: "stage-a".into(),
            stage_b_model: "stage-b".into(),
            script: None,
            timeout_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Plans per task.
    pub n: usize,
    /// Candidates per plan.
    pub m: usize,
    /// Stage-A attempt budget.
    pub r: usize,
    /// Bounded-check depth.
    pub d: usize,
    /// Suspect-cone depth.
    pub d_max: usize,
    /// Smoke-test cycle cap.
    pub w_smoke: usize,
    /// Lint saturation count.
    pub l_lint: usize,
    /// Slice line cap.
    pub l_max: usize,
    /// Escalation threshold.
    pub tau: f64,
    /// Trace-stability horizon and waveform half-window, in cycles.
    pub dt_wave: usize,
    /// Concurrent candidate checks; `None` means `n * m`.
    pub batch: Option<usize>,
    /// L2 strength for calibration; `None` selects it by cross-validation.
    pub lambda: Option<f64>,
    /// Worker threads for multi-task commands.
    pub jobs: usize,
    pub seed: u64,
    /// Plan decoding temperatures, cycled when `n` exceeds the list.
    pub temperatures: Vec<f64>,
    /// Derive `U_0` and replay stored micro-tests during smoke testing.
    pub microtests: bool,
    /// Run the formal amplifier on candidates that pass smoke testing.
    pub formal: bool,
    /// Distill official mismatches into micro-tests.
    pub harness_microtests: bool,
    /// One reflexion round per attempt.
    pub repair: bool,
    /// Cap on compile, simulate and formal invocations per episode.
    pub max_tool_calls: Option<usize>,
    pub clock: ClockMode,
    pub costs: VirtualCosts,
    pub tools: ToolsConfig,
    pub backend: BackendConfig,
    /// Where episode logs and transcripts are written.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 3,
            m: 4,
            r: 5,
            d: 10,
            d_max: 5,
            w_smoke: 100,
            l_lint: 30,
            l_max: 30,
            tau: 0.5,
            dt_wave: 64,
            batch: None,
            lambda: None,
            jobs: 1,
            seed: 0,
            temperatures: vec![0.2, 0.7, 1.0],
            microtests: true,
            formal: true,
            harness_microtests: true,
            repair: true,
            max_tool_calls: None,
            clock: ClockMode::Virtual,
            costs: VirtualCosts::default(),
            tools: ToolsConfig::default(),
            backend: BackendConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be at least {min}")]
    TooSmall { field: &'static str, min: usize },
    #[error("tau must lie in [0, 1], got {0}")]
    Tau(f64),
    #[error("lambda must be finite and non-negative, got {0}")]
    Lambda(f64),
    #[error("temperatures must be non-empty")]
    Temperatures,
}

impl RunConfig {
    pub fn batch_width(&self) -> usize {
        self.batch.unwrap_or(self.n * self.m).max(1)
    }

    /// Temperature for plan `i`.
    pub fn temperature(&self, i: usize) -> f64 {
        self.temperatures[i % self.temperatures.len()]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("n", self.n),
            ("m", self.m),
            ("r", self.r),
            ("d", self.d),
            ("d_max", self.d_max),
            ("w_smoke", self.w_smoke),
            ("l_lint", self.l_lint),
            ("l_max", self.l_max),
            ("dt_wave", self.dt_wave),
            ("jobs", self.jobs),
        ] {
            if v < 1 {
                return Err(ConfigError::TooSmall { field, min: 1 });
            }
        }
        if self.batch == Some(0) {
            return Err(ConfigError::TooSmall {
                field: "batch",
                min: 1,
            });
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::Tau(self.tau));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() || l < 0.0 {
                return Err(ConfigError::Lambda(l));
            }
        }
        if self.temperatures.is_empty() {
            return Err(ConfigError::Temperatures);
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
