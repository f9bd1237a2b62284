//! The diagonal conditional `f(t) ∝ t^n exp(-(n/2) s t^2 - b t)` on `t > 0`.

use rand::Rng;

use super::DiagSampler;
use crate::error::{BjnsError, Result};
use crate::model::DiagState;
use crate::stats::QuadFormCache;

pub const GRID_STEP: f64 = 1e-3;
/// Above this many points the step is widened so one draw stays cheap.
const MAX_GRID_POINTS: usize = 2_000_000;

pub fn diag_log_density(n: f64, s: f64, b: f64, t: f64) -> f64 {
    n * t.ln() - 0.5 * n * s * t * t - b * t
}

/// Closed-form maximizer of the conditional.
pub fn diag_mode(n: usize, s: f64, b: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(BjnsError::Degenerate(format!("diagonal update with sample variance {s}")));
    }
    if n == 0 {
        return Err(BjnsError::Degenerate("diagonal update with no observations".into()));
    }
    let n = n as f64;
    let root = (b * b + 4.0 * n * n * s).sqrt();
    // both forms equal the positive root; pick the one without cancellation
    let mode = if b > 0.0 { 2.0 * n / (b + root) } else { (root - b) / (2.0 * n * s) };
    Ok(mode)
}

/// Discretized conditional on `0.001, 0.002, ..., 6 * mode`.
#[derive(Clone, Debug)]
pub struct DiagGrid {
    mode: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl DiagGrid {
    pub fn new(n: usize, s: f64, b: f64) -> Result<Self> {
        let mode = diag_mode(n, s, b)?;
        let upper = 6.0 * mode;
        let mut step = GRID_STEP;
        let mut points = (upper / step + 1e-9).floor() as usize;
        if points > MAX_GRID_POINTS {
            step = upper / MAX_GRID_POINTS as f64;
            points = MAX_GRID_POINTS;
        }
        let nf = n as f64;
        // weights relative to the mode, which is the largest possible value
        let top = diag_log_density(nf, s, b, mode);
        let mut cumulative = Vec::with_capacity(points);
        let mut acc = 0.0;
        for m in 1..=points {
            acc += (diag_log_density(nf, s, b, m as f64 * step) - top).exp();
            cumulative.push(acc);
        }
        if points < 2 || !(acc > 0.0) || !acc.is_finite() {
            log::warn!("diagonal grid degenerate (mode {mode:e}, {points} points); using the mode");
            cumulative.clear();
        }
        Ok(DiagGrid { mode, step, cumulative })
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn points(&self) -> usize {
        self.cumulative.len()
    }

    /// Grid point `m` (1-based position on the grid).
    pub fn point(&self, m: usize) -> f64 {
        m as f64 * self.step
    }

    /// Normalized probability of grid point `m` (1-based).
    pub fn probability(&self, m: usize) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let prev = if m > 1 { self.cumulative[m - 2] } else { 0.0 };
        (self.cumulative[m - 1] - prev) / total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(&total) = self.cumulative.last() else {
            return self.mode;
        };
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        self.point(idx + 1)
    }
}

pub fn sample_diag<R: Rng + ?Sized>(n: usize, s: f64, b: f64, sampler: DiagSampler, rng: &mut R) -> Result<f64> {
    match sampler {
        DiagSampler::PointMass => diag_mode(n, s, b),
        DiagSampler::Grid => Ok(DiagGrid::new(n, s, b)?.sample(rng)),
    }
}

/// `b = gamma + n_k sum_{j != i} omega_ij s_ij` for group `k`, row `i`.
pub fn compute_b(cache: &QuadFormCache<'_>, delta: &DiagState, gamma: f64, k: usize, i: usize) -> f64 {
    gamma + cache.stats().n(k) as f64 * cache.offdiag_row_inner(delta, k, i)
}
