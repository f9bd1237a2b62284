//! The Gibbs sampler.
//!
//! One sweep walks the upper triangle row by row. For each edge it refreshes
//! the shrinkage parameter of every component and then redraws the edge's
//! coefficient vector from its mixture conditional; after each row it redraws
//! that row's diagonal in every group.

mod chain;
mod diag;
mod edge;
mod shrinkage;

pub use chain::{chain_rng, gibbs_sweep, run_chain, run_chain_observed, ChainOutput, ChainState, SweepInfo};
pub use diag::{compute_b, diag_log_density, diag_mode, sample_diag, DiagGrid, GRID_STEP};
pub use edge::{
    category_probabilities, category_probabilities_direct, edge_mixture_params, log_prior_odds, sample_theta_ij,
    MixtureComponent, MixtureParams,
};
pub use shrinkage::{draw_gamma_diag, draw_lambda};

use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};

/// Gamma hyperparameters shared by every shrinkage parameter (shape `r`, rate `s`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageHyper {
    pub r: f64,
    pub s: f64,
}

impl Default for ShrinkageHyper {
    fn default() -> Self {
        ShrinkageHyper { r: 1e-2, s: 1e-6 }
    }
}

impl ShrinkageHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.s > 0.0 && self.r.is_finite() && self.s.is_finite()) {
            return Err(BjnsError::invalid(format!(
                "shrinkage hyperparameters must be positive, got r={} s={}",
                self.r, self.s
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorOddsMode {
    /// Mixture weights are the bare `c_l`.
    Literal,
    /// Each `c_l` is multiplied by the inclusion odds `q / (1 - q)`.
    Corrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub q1: f64,
    pub q2: f64,
    pub tau: f64,
    pub mode: PriorOddsMode,
}

impl PriorConfig {
    /// `q1 = max(1/p, 1e-4)`, `q2 = q1^2`, `tau = 0.25 sqrt(nbar / log p)`.
    pub fn defaults_for(p: usize, mean_n: f64, mode: PriorOddsMode) -> Self {
        let q1 = (1.0 / p as f64).max(1e-4);
        let log_p = (p as f64).ln();
        let tau = if log_p > 0.0 { 0.25 * (mean_n / log_p).sqrt() } else { f64::INFINITY };
        PriorConfig {
            q1,
            q2: q1 * q1,
            tau,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.q2 && self.q2 <= self.q1 && self.q1 < 1.0) {
            return Err(BjnsError::invalid(format!(
                "need 0 < q2 <= q1 < 1, got q1={} q2={}",
                self.q1, self.q2
            )));
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(BjnsError::invalid("tau must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagSampler {
    Grid,
    PointMass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Redrawn from its conditional before every edge update.
    Sampled,
    /// Held at the given value for every component.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burnin: usize,
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
    pub diag_sampler: DiagSampler,
    /// Sweeps between full recomputations of the cached products.
    pub refresh_every: usize,
    pub lambda: LambdaMode,
    /// Keep the diagonals at their initial values.
    pub freeze_diagonals: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burnin: 2000,
            samples: 2000,
            seed: 0,
            stream: 0,
            diag_sampler: DiagSampler::PointMass,
            refresh_every: 500,
            lambda: LambdaMode::Sampled,
            freeze_diagonals: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(BjnsError::invalid("samples must be at least 1"));
        }
        if self.refresh_every == 0 {
            return Err(BjnsError::invalid("refresh_every must be at least 1"));
        }
        if let LambdaMode::Fixed(v) = self.lambda {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BjnsError::invalid("fixed lambda must be finite and non-negative"));
            }
        }
        Ok(())
    }
}
