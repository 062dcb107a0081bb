use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::isotonic::fit_isotonic;
use super::score::{logistic, FitMeta, ScoreModel, Weights, ZMode};
use crate::diagnostics::DiagnosticVector;

pub const DEFAULT_LAMBDA: f64 = 1e-2;
pub const LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
const GRAD_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("calibration data needs at least one row of each label ({positives} positive, {negatives} negative)")]
    DegenerateData { positives: usize, negatives: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub s: DiagnosticVector,
    /// Whether Stage A eventually succeeded.
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub rows: Vec<LabeledRow>,
}

impl CalibrationDataset {
    pub fn push(&mut self, s: DiagnosticVector, label: bool) {
        self.rows.push(LabeledRow { s, label });
    }

    fn check(&self) -> Result<(), FitError> {
        let positives = self.rows.iter().filter(|r| r.label).count();
        let negatives = self.rows.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(FitError::DegenerateData {
                positives,
                negatives,
            });
        }
        Ok(())
    }
}

fn features(s: &DiagnosticVector) -> Vector6<f64> {
    let a = s.to_array();
    Vector6::new(1.0, a[0], a[1], a[2], a[3], a[4])
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `λ‖w‖²` (bias excluded) and its gradient, with
/// `theta = [w0, w1..w5]`.
pub fn loss_and_grad(theta: &[f64; 6], rows: &[LabeledRow], lambda: f64) -> (f64, [f64; 6]) {
    let t = Vector6::from_column_slice(theta);
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    let mut g = Vector6::zeros();
    for r in rows {
        let x = features(&r.s);
        let z = t.dot(&x);
        let y = if r.label { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        g += x * (logistic(z) - y);
    }
    loss /= n;
    g /= n;
    for j in 1..6 {
        loss += lambda * t[j] * t[j];
        g[j] += 2.0 * lambda * t[j];
    }
    (loss, [g[0], g[1], g[2], g[3], g[4], g[5]])
}

fn hessian(t: &Vector6<f64>, rows: &[LabeledRow], lambda: f64) -> Matrix6<f64> {
    let n = rows.len().max(1) as f64;
    let mut h = Matrix6::zeros();
    for r in rows {
        let x = features(&r.s);
        let p = logistic(t.dot(&x));
        h += x * x.transpose() * (p * (1.0 - p));
    }
    h /= n;
    for j in 1..6 {
        h[(j, j)] += 2.0 * lambda;
    }
    h
}

fn newton_direction(h: &Matrix6<f64>, g: &Vector6<f64>) -> Vector6<f64> {
    let mut mu = 0.0;
    let scale = h.trace().abs().max(1.0);
    for _ in 0..30 {
        let hm = h + Matrix6::identity() * mu;
        if let Some(ch) = hm.cholesky() {
            return -ch.solve(g);
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
    }
    -g
}

/// Damped Newton from zero. Deterministic for a given dataset and `λ`.
pub fn fit_weights(data: &CalibrationDataset, lambda: f64) -> Result<Weights, FitError> {
    data.check()?;
    assert!(lambda >= 0.0, "lambda must be non-negative");
    let rows = &data.rows;
    let mut theta = [0.0f64; 6];
    let (mut loss, mut grad) = loss_and_grad(&theta, rows, lambda);
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        let g = Vector6::from_column_slice(&grad);
        if g.norm() <= GRAD_TOL {
            break;
        }
        iterations += 1;
        let t = Vector6::from_column_slice(&theta);
        let mut dir = newton_direction(&hessian(&t, rows, lambda), &g);
        if dir.dot(&g) >= 0.0 {
            dir = -g;
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let cand = t + dir * step;
            let c = [cand[0], cand[1], cand[2], cand[3], cand[4], cand[5]];
            let (l, gr) = loss_and_grad(&c, rows, lambda);
            if l <= loss + 1e-4 * step * slope {
                theta = c;
                loss = l;
                grad = gr;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let grad_norm = Vector6::from_column_slice(&grad).norm();
    Ok(Weights {
        w0: theta[0],
        w: [theta[1], theta[2], theta[3], theta[4], theta[5]],
        lambda,
        fit_meta: Some(FitMeta {
            iterations,
            loss,
            grad_norm,
        }),
    })
}

/// Mean held-out log loss over 5 folds (row index mod 5) for each grid value;
/// returns the best. Small sets fall back to [`DEFAULT_LAMBDA`].
pub fn choose_lambda(data: &CalibrationDataset) -> Result<f64, FitError> {
    data.check()?;
    const FOLDS: usize = 5;
    if data.rows.len() < 2 * FOLDS {
        return Ok(DEFAULT_LAMBDA);
    }
    let mut best = (f64::INFINITY, DEFAULT_LAMBDA);
    for &lambda in &LAMBDA_GRID {
        let mut total = 0.0;
        let mut count = 0usize;
        for f in 0..FOLDS {
            let train = CalibrationDataset {
                rows: data
                    .rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % FOLDS != f)
                    .map(|(_, r)| *r)
                    .collect(),
            };
            let Ok(w) = fit_weights(&train, lambda) else {
                continue;
            };
            for (_, r) in data.rows.iter().enumerate().filter(|(i, _)| i % FOLDS == f) {
                let p = logistic(w.linear(&r.s)).clamp(1e-12, 1.0 - 1e-12);
                total -= if r.label { p.ln() } else { (1.0 - p).ln() };
                count += 1;
            }
        }
        if count > 0 && total / (count as f64) < best.0 - 1e-12 {
            best = (total / count as f64, lambda);
        }
    }
    Ok(best.1)
}

/// Fits weights (choosing `λ` by cross-validation when `None`) and an
/// isotonic map over the in-sample probabilities.
pub fn calibrate(data: &CalibrationDataset, lambda: Option<f64>) -> Result<ScoreModel, FitError> {
    let lambda = match lambda {
        Some(l) => l,
        None => choose_lambda(data)?,
    };
    let weights = fit_weights(data, lambda)?;
    let pts: Vec<(f64, f64)> = data
        .rows
        .iter()
        .map(|r| {
            (
                logistic(weights.linear(&r.s)),
                if r.label { 1.0 } else { 0.0 },
            )
        })
        .collect();
    Ok(ScoreModel {
        weights,
        isotonic: Some(fit_isotonic(&pts)),
        mode: ZMode::Probability,
    })
}
