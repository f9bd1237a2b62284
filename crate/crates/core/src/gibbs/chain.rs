//! Sweeps and whole chains.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::diag::{compute_b, sample_diag};
use super::edge::{combine, fill_group_terms, sample_theta_ij, MixtureParams};
use super::shrinkage::{draw_gamma_diag, draw_lambda};
use super::{ChainConfig, LambdaMode, PriorConfig, ShrinkageHyper};
use crate::error::{BjnsError, Result};
use crate::inference::SelectionTrace;
use crate::model::{DiagState, ModelSpec, ThetaState};
use crate::stats::{GroupStats, QuadFormCache};

/// The generator used for every chain: ChaCha8 keyed by `seed`, with
/// independent chains told apart by `stream`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: ThetaState,
    pub delta: DiagState,
}

impl ChainState {
    /// Identity diagonals, no edges.
    pub fn initial(p: usize, groups: usize) -> Self {
        ChainState {
            theta: ThetaState::empty(p),
            delta: DiagState::filled(groups, p, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepInfo {
    /// 0-based, counting burn-in sweeps.
    pub sweep: usize,
    pub retained: bool,
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub trace: SelectionTrace,
    pub state: ChainState,
}

/// One full pass over every edge and diagonal.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    cache: &mut QuadFormCache<'_>,
    hyper: &ShrinkageHyper,
    prior: &PriorConfig,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<()> {
    cache.check(&state.theta, &state.delta)?;
    let spec = cache.spec();
    let stats = cache.stats();
    let p = state.theta.p();
    let groups = spec.groups();
    let mut scale = vec![0.0; groups];
    let mut resid = vec![0.0; groups];
    let mut lambdas = vec![0.0; spec.len()];

    for i in 0..p {
        for j in i + 1..p {
            let current = state.theta.get(i, j);
            match cfg.lambda {
                LambdaMode::Sampled => {
                    for (l, lambda) in lambdas.iter_mut().enumerate() {
                        let value = if current.component == Some(l) { current.value } else { 0.0 };
                        *lambda = draw_lambda(value, hyper, rng);
                    }
                }
                LambdaMode::Fixed(v) => lambdas.iter_mut().for_each(|l| *l = v),
            }
            fill_group_terms(cache, current, i, j, &mut scale, &mut resid);
            let (prec, shift) = combine(cache, &lambdas, &scale, &resid);
            let params = MixtureParams::from_moments(&prec, &shift)?;
            let others = state.theta.density() - current.is_present() as usize;
            let next = sample_theta_ij(&params, prior, others, rng);
            cache.apply_theta_update(&mut state.theta, i, j, next)?;
        }
        if !cfg.freeze_diagonals {
            for k in 0..groups {
                let current = state.delta.get(k, i);
                let gamma = draw_gamma_diag(current, hyper, rng);
                let b = compute_b(cache, &state.delta, gamma, k, i);
                let value = sample_diag(stats.n(k), stats.cov(k)[(i, i)], b, cfg.diag_sampler, rng)?;
                cache.apply_diag_update(&mut state.delta, k, i, value)?;
            }
        }
    }
    Ok(())
}

/// Runs `burnin + samples` sweeps from the identity start and records the
/// retained ones.
pub fn run_chain(
    stats: &GroupStats,
    spec: &ModelSpec,
    cfg: &ChainConfig,
    hyper: &ShrinkageHyper,
    prior: &PriorConfig,
) -> Result<ChainOutput> {
    run_chain_observed(stats, spec, cfg, hyper, prior, None, &mut |_, _| Ok(()))
}

/// [`run_chain`] with an optional starting state and a callback after every
/// sweep (burn-in included).
pub fn run_chain_observed(
    stats: &GroupStats,
    spec: &ModelSpec,
    cfg: &ChainConfig,
    hyper: &ShrinkageHyper,
    prior: &PriorConfig,
    init: Option<ChainState>,
    observer: &mut dyn FnMut(SweepInfo, &ChainState) -> Result<()>,
) -> Result<ChainOutput> {
    cfg.validate()?;
    hyper.validate()?;
    prior.validate()?;
    spec.validate().map_err(BjnsError::InvalidSpec)?;
    if spec.groups() != stats.groups() {
        return Err(BjnsError::invalid(format!(
            "spec has {} groups, data has {}",
            spec.groups(),
            stats.groups()
        )));
    }
    let p = stats.p();
    let mut state = init.unwrap_or_else(|| ChainState::initial(p, stats.groups()));
    if state.theta.as_slice().iter().any(|c| c.component.is_some_and(|l| l >= spec.len())) {
        return Err(BjnsError::invalid("initial state refers to a component outside the spec"));
    }
    let mut cache = QuadFormCache::new(stats, spec, &state.theta, &state.delta)?;
    let mut rng = chain_rng(cfg.seed, cfg.stream);
    let mut trace = SelectionTrace::new(p, spec.len(), stats.groups(), cfg.samples);

    for sweep in 0..cfg.burnin + cfg.samples {
        gibbs_sweep(&mut state, &mut cache, hyper, prior, cfg, &mut rng)?;
        if (sweep + 1) % cfg.refresh_every == 0 {
            let drift = cache.drift(&state.theta, &state.delta)?;
            log::debug!("sweep {}: cache drift {drift:e}", sweep + 1);
            cache.refresh(&state.theta, &state.delta)?;
        }
        let retained = sweep >= cfg.burnin;
        if retained {
            trace.record(&state.theta, &state.delta);
        }
        observer(SweepInfo { sweep, retained }, &state)?;
    }
    Ok(ChainOutput { trace, state })
}
