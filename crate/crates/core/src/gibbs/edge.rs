//! The per-edge mixture conditional.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{PriorConfig, PriorOddsMode};
use crate::error::{BjnsError, Result};
use crate::model::{DiagState, EdgeCoefficient, ThetaState};
use crate::stats::QuadFormCache;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureComponent {
    pub mu: f64,
    pub nu2: f64,
    pub log_c: f64,
}

/// One entry per spec component, in spec order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixtureParams {
    pub components: Vec<MixtureComponent>,
}

impl MixtureParams {
    pub fn from_moments(precision: &[f64], shift: &[f64]) -> Result<Self> {
        let components = precision
            .iter()
            .zip(shift)
            .map(|(&prec, &h)| {
                if !(prec > 0.0) || !prec.is_finite() {
                    return Err(BjnsError::Numeric(format!("edge conditional precision {prec}")));
                }
                let mu = -h / prec;
                let nu2 = 1.0 / prec;
                let log_c = 0.5 * (2.0 * std::f64::consts::PI * nu2).ln() + 0.5 * mu * mu * prec;
                Ok(MixtureComponent { mu, nu2, log_c })
            })
            .collect::<Result<_>>()?;
        Ok(MixtureParams { components })
    }
}

/// Mixture parameters of edge (i, j) given everything else. `lambdas` has one
/// entry per spec component. The edge's current value is excluded from the
/// residual.
pub fn edge_mixture_params(
    cache: &QuadFormCache<'_>,
    theta: &ThetaState,
    delta: &DiagState,
    i: usize,
    j: usize,
    lambdas: &[f64],
) -> Result<MixtureParams> {
    if i >= j || j >= theta.p() {
        return Err(BjnsError::invalid(format!("edge ({i}, {j}) is not in the upper triangle")));
    }
    cache.check(theta, delta)?;
    let spec = cache.spec();
    if lambdas.len() != spec.len() {
        return Err(BjnsError::invalid("need one lambda per component"));
    }
    let groups = spec.groups();
    let mut scale = vec![0.0; groups];
    let mut resid = vec![0.0; groups];
    fill_group_terms(cache, theta.get(i, j), i, j, &mut scale, &mut resid);
    let (prec, shift) = combine(cache, lambdas, &scale, &resid);
    MixtureParams::from_moments(&prec, &shift)
}

/// Per-group `n_k (s_ii + s_jj)` and `n_k * residual`, with the edge's own
/// contribution removed.
pub(crate) fn fill_group_terms(
    cache: &QuadFormCache<'_>,
    current: EdgeCoefficient,
    i: usize,
    j: usize,
    scale: &mut [f64],
    resid: &mut [f64],
) {
    let stats = cache.stats();
    let spec = cache.spec();
    for k in 0..spec.groups() {
        let s = stats.cov(k);
        let n = stats.n(k) as f64;
        let diag_sum = s[(i, i)] + s[(j, j)];
        let own = current.omega_entry(spec, k);
        scale[k] = n * diag_sum;
        resid[k] = n * (cache.residual_inner_unchecked(k, i, j) - own * diag_sum);
    }
}

pub(crate) fn combine(cache: &QuadFormCache<'_>, lambdas: &[f64], scale: &[f64], resid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let spec = cache.spec();
    let mut prec = Vec::with_capacity(spec.len());
    let mut shift = Vec::with_capacity(spec.len());
    for (comp, &lambda) in spec.components().iter().zip(lambdas) {
        let mut p_sum = lambda;
        let mut h_sum = 0.0;
        let mut mask = comp.mask();
        while mask != 0 {
            let k = mask.trailing_zeros() as usize;
            p_sum += scale[k];
            h_sum += resid[k];
            mask &= mask - 1;
        }
        prec.push(p_sum);
        shift.push(h_sum);
    }
    (prec, shift)
}

/// Log of the inclusion odds applied to every non-null weight. Zero in
/// literal mode. `other_edges` counts present edges excluding this one.
pub fn log_prior_odds(prior: &PriorConfig, other_edges: usize) -> f64 {
    match prior.mode {
        PriorOddsMode::Literal => 0.0,
        PriorOddsMode::Corrected => {
            let q = if (other_edges + 1) as f64 <= prior.tau { prior.q1 } else { prior.q2 };
            (q / (1.0 - q)).ln()
        }
    }
}

/// Selection probabilities, absent first, computed in log space.
pub fn category_probabilities(params: &MixtureParams, prior: &PriorConfig, other_edges: usize) -> Vec<f64> {
    let odds = log_prior_odds(prior, other_edges);
    let mut logw = Vec::with_capacity(params.components.len() + 1);
    logw.push(0.0);
    logw.extend(params.components.iter().map(|c| c.log_c + odds));
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// The same probabilities computed directly; overflows for strong signals.
pub fn category_probabilities_direct(params: &MixtureParams, prior: &PriorConfig, other_edges: usize) -> Vec<f64> {
    let odds = log_prior_odds(prior, other_edges).exp();
    let mut w = vec![1.0];
    w.extend(params.components.iter().map(|c| odds * c.log_c.exp()));
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Draws the edge's category and, if present, its value.
pub fn sample_theta_ij<R: Rng + ?Sized>(
    params: &MixtureParams,
    prior: &PriorConfig,
    other_edges: usize,
    rng: &mut R,
) -> EdgeCoefficient {
    let probs = category_probabilities(params, prior, other_edges);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (idx, &prob) in probs.iter().enumerate() {
        acc += prob;
        if u < acc {
            pick = idx;
            break;
        }
    }
    // skip trailing zero-probability categories left by rounding
    while pick > 0 && probs[pick] == 0.0 {
        pick -= 1;
    }
    if pick == 0 {
        return EdgeCoefficient::ABSENT;
    }
    let comp = params.components[pick - 1];
    let normal = Normal::new(comp.mu, comp.nu2.sqrt()).expect("finite normal parameters");
    let mut value = normal.sample(rng);
    while value == 0.0 {
        value = normal.sample(rng);
    }
    EdgeCoefficient::active(pick - 1, value)
}
