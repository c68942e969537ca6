//! Gradient geometry diagnostics and the three weighting strategies.
//!
//! The adaptive physics weight couples a magnitude-balance ratio with a
//! sigmoid conflict gate on the data/physics cosine:
//!
//! ```text
//! lambda_hat <- alpha * lambda_hat
//!             + (1 - alpha) * (|g_data| / (|g_phy| + eps)) * sigmoid(kappa * s_cos)
//! ```
//!
//! The magnitude-balance baseline (LRA) is the identical scaffold with the
//! gate factor forced to 1, so ablations isolate the geometry term exactly.
//! The data weight is anchored at 1 and the logical weight stays fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::sigmoid;

/// Cosine similarity with the denominator guarded as `max(|g1||g2|, eps)`
/// and the result clamped to [-1, 1] against rounding overshoot.
pub fn cosine(g1: &[f64], g2: &[f64], epsilon: f64) -> Result<f64> {
    if g1.len() != g2.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", g1.len(), g2.len())));
    }
    let dot: f64 = g1.iter().zip(g2).map(|(a, b)| a * b).sum();
    let denom = (norm(g1) * norm(g2)).max(epsilon);
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Multi-gradient alignment score `2 * ||mean of unit vectors||^2 - 1`.
/// For two gradients this recovers the pairwise cosine exactly.
pub fn alignment_score(gs: &[&[f64]]) -> Result<f64> {
    if gs.is_empty() {
        return Err(Error::ZeroVector);
    }
    let dim = gs[0].len();
    let mut mean = vec![0.0; dim];
    for g in gs {
        if g.len() != dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", g.len(), dim)));
        }
        let n = norm(g);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        for (m, &v) in mean.iter_mut().zip(g.iter()) {
            *m += v / n;
        }
    }
    let inv = 1.0 / gs.len() as f64;
    let sq: f64 = mean.iter().map(|m| (m * inv) * (m * inv)).sum();
    Ok(2.0 * sq - 1.0)
}

pub fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-step gradient geometry: the three raw gradients, their norms, the
/// data/physics cosine, and the multi-gradient alignment score (computed
/// over whichever of the three gradients are nonzero; the sparse logical
/// gradient is usually zero and drops out).
#[derive(Clone, Debug)]
pub struct GradientDiagnostics {
    pub g_data: Vec<f64>,
    pub g_phy: Vec<f64>,
    pub g_logic: Vec<f64>,
    pub norm_data: f64,
    pub norm_phy: f64,
    pub norm_logic: f64,
    pub s_cos: f64,
    pub alignment: f64,
}

impl GradientDiagnostics {
    pub fn compute(g_data: Vec<f64>, g_phy: Vec<f64>, g_logic: Vec<f64>, epsilon: f64) -> Result<Self> {
        if g_data.len() != g_phy.len() || g_data.len() != g_logic.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} / {} / {}",
                g_data.len(),
                g_phy.len(),
                g_logic.len()
            )));
        }
        let norm_data = norm(&g_data);
        let norm_phy = norm(&g_phy);
        let norm_logic = norm(&g_logic);
        let s_cos = cosine(&g_data, &g_phy, epsilon)?;
        let nonzero: Vec<&[f64]> = [&g_data, &g_phy, &g_logic]
            .into_iter()
            .filter(|g| norm(g) > 0.0)
            .map(|g| g.as_slice())
            .collect();
        let alignment = if nonzero.is_empty() { 1.0 } else { alignment_score(&nonzero)? };
        Ok(GradientDiagnostics {
            g_data,
            g_phy,
            g_logic,
            norm_data,
            norm_phy,
            norm_logic,
            s_cos,
            alignment,
        })
    }
}

/// The adaptive weight and its hyperparameters. `lambda_data` is the anchor
/// and stays at 1; `lambda_logic` is fixed for the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateState {
    pub lambda_hat: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub lambda_logic: f64,
    pub lambda_data: f64,
}

impl GateState {
    /// lambda_hat starts at 1.0.
    pub fn new(alpha: f64, kappa: f64, epsilon: f64, lambda_logic: f64) -> Self {
        GateState { lambda_hat: 1.0, alpha, kappa, epsilon, lambda_logic, lambda_data: 1.0 }
    }

    /// EMA of the gated magnitude ratio. `gate` is the conflict-gate factor.
    #[inline]
    fn ema_update(&mut self, diag: &GradientDiagnostics, gate: f64) {
        let instantaneous = diag.norm_data / (diag.norm_phy + self.epsilon) * gate;
        self.lambda_hat = self.alpha * self.lambda_hat + (1.0 - self.alpha) * instantaneous;
    }

    /// Conflict-gated update: gate = sigmoid(kappa * s_cos).
    pub fn cggs_update(&mut self, diag: &GradientDiagnostics) {
        self.ema_update(diag, sigmoid(self.kappa * diag.s_cos));
    }

    /// Conflict-gated update with the gate pinned to a given value.
    /// `cggs_update_with_gate(d, 1.0)` is bitwise identical to `lra_update`.
    pub fn cggs_update_with_gate(&mut self, diag: &GradientDiagnostics, gate: f64) {
        self.ema_update(diag, gate);
    }

    /// Magnitude balancing only: identical scaffold, gate forced to 1.
    pub fn lra_update(&mut self, diag: &GradientDiagnostics) {
        self.ema_update(diag, 1.0);
    }
}

/// Update direction `d = g_data + lambda_phy * g_phy + lambda_logic * g_logic`.
pub fn combine(diag: &GradientDiagnostics, lambda_phy: f64, lambda_logic: f64) -> Vec<f64> {
    diag.g_data
        .iter()
        .zip(&diag.g_phy)
        .zip(&diag.g_logic)
        .map(|((&d, &p), &l)| d + lambda_phy * p + lambda_logic * l)
        .collect()
}
