use serde::{Deserialize, Serialize};

use super::isotonic::IsotonicMap;
use crate::diagnostics::DiagnosticVector;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Linear weights over `[comp, lint, smoke, trace, budget]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w0: f64,
    pub w: [f64; 5],
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_meta: Option<FitMeta>,
}

impl Default for Weights {
    /// Hand-set prior used before any calibration run: compiling and smoke
    /// agreement dominate.
    fn default() -> Self {
        Weights {
            w0: -2.0,
            w: [1.0, 0.5, 2.0, 0.5, 1.0],
            lambda: 0.0,
            fit_meta: None,
        }
    }
}

impl Weights {
    pub fn linear(&self, s: &DiagnosticVector) -> f64 {
        self.w0
            + self
                .w
                .iter()
                .zip(s.to_array())
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// What `Z` is compared against `τ` as.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    /// Logistic link followed by the isotonic map when one is present.
    #[default]
    Probability,
    /// The raw linear score.
    Linear,
}

/// Weights plus optional calibration, as persisted in a weights file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    #[serde(flatten)]
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotonic: Option<IsotonicMap>,
    #[serde(default)]
    pub mode: ZMode,
}

impl ScoreModel {
    pub fn z(&self, s: &DiagnosticVector) -> f64 {
        match self.mode {
            ZMode::Probability => z_score(&self.weights, s, self.isotonic.as_ref()),
            ZMode::Linear => self.weights.linear(s),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// `cal(logistic(w0 + Σ w_i s_i))`, in `[0, 1]`.
pub fn z_score(wts: &Weights, s: &DiagnosticVector, cal: Option<&IsotonicMap>) -> f64 {
    let p = logistic(wts.linear(s));
    match cal {
        Some(c) => c.eval(p),
        None => p,
    }
}
