//! Pruning the component family for many groups.
//!
//! Every pair of groups is fitted on its own with components {a}, {b} and
//! {a,b}. Pairs whose shared component collects few edges are declared
//! inactive, and every larger subset containing an inactive pair is dropped.
//! The surviving family is then refitted and pruned again until it stops
//! shrinking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};
use crate::gibbs::{run_chain, ChainConfig, PriorConfig, PriorOddsMode, ShrinkageHyper};
use crate::inference::{majority_vote, FitResult};
use crate::model::{Component, ModelSpec, MAX_FULL_GROUPS};
use crate::stats::GroupStats;

/// Streams used by the reduced fits start here; pairwise fit `n` uses `n + 1`.
pub const REDUCED_STREAM_BASE: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    /// Inactive when the count is below `alpha` times the largest count.
    Relative { alpha: f64 },
    /// Inactive when the count falls in the lower cluster of a 1-D 2-means split.
    TwoMeans,
}

impl Default for PruneRule {
    fn default() -> Self {
        PruneRule::Relative { alpha: 0.2 }
    }
}

impl PruneRule {
    /// Inactive flags for `counts`.
    pub fn inactive(&self, counts: &[usize]) -> Vec<bool> {
        match *self {
            PruneRule::Relative { alpha } => {
                let max = counts.iter().copied().max().unwrap_or(0) as f64;
                counts.iter().map(|&c| (c as f64) < alpha * max).collect()
            }
            PruneRule::TwoMeans => match two_means_cut(counts) {
                Some(cut) => counts.iter().map(|&c| (c as f64) < cut).collect(),
                None => vec![false; counts.len()],
            },
        }
    }
}

/// Threshold between the two clusters of the best 1-D split, or `None` when
/// all counts are equal.
fn two_means_cut(counts: &[usize]) -> Option<f64> {
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let sse = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    (1..sorted.len())
        .filter(|&s| sorted[s - 1] < sorted[s])
        .map(|s| (sse(&sorted[..s]) + sse(&sorted[s..]), s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| 0.5 * (sorted[s - 1] + sorted[s]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Stage {
    Pairwise,
    Reduced(usize),
    Final,
}

impl From<Stage> for String {
    fn from(s: Stage) -> String {
        match s {
            Stage::Pairwise => "pairwise".into(),
            Stage::Reduced(r) => format!("reduced-{r}"),
            Stage::Final => "final".into(),
        }
    }
}

impl TryFrom<String> for Stage {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "pairwise" => Ok(Stage::Pairwise),
            "final" => Ok(Stage::Final),
            other => other
                .strip_prefix("reduced-")
                .and_then(|r| r.parse().ok())
                .map(Stage::Reduced)
                .ok_or_else(|| format!("unknown stage {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    /// 1-based group labels.
    pub component: Vec<usize>,
    pub edge_count: usize,
    pub active: bool,
    pub stage: Stage,
}

impl ScreenEntry {
    pub fn component(&self) -> Component {
        Component::from_groups(&self.component.iter().map(|l| l - 1).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub entries: Vec<ScreenEntry>,
}

impl ScreenReport {
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &ScreenEntry> {
        self.entries.iter().filter(move |e| e.stage == stage)
    }

    /// Pairs flagged inactive at the pairwise stage.
    pub fn inactive_pairs(&self) -> Vec<Component> {
        self.stage(Stage::Pairwise)
            .filter(|e| !e.active)
            .map(ScreenEntry::component)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenConfig {
    pub pairwise: ChainConfig,
    pub reduced: ChainConfig,
    pub hyper: ShrinkageHyper,
    pub prior_mode: PriorOddsMode,
    pub rule: PruneRule,
    pub max_rounds: usize,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl ScreenConfig {
    /// Shorter chains for the pairwise stage, full chains afterwards. The
    /// prior odds use the edge-count weights here: with the bare weights the
    /// pairwise fits pick up a few stray shared edges on every pair, which is
    /// enough to keep unrelated pairs above the pruning cutoff.
    pub fn with_seed(seed: u64) -> Self {
        ScreenConfig {
            pairwise: ChainConfig {
                burnin: 1000,
                samples: 1000,
                seed,
                ..ChainConfig::default()
            },
            reduced: ChainConfig {
                seed,
                ..ChainConfig::default()
            },
            hyper: ShrinkageHyper::default(),
            prior_mode: PriorOddsMode::Corrected,
            rule: PruneRule::default(),
            max_rounds: 5,
            jobs: 0,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| BjnsError::invalid(format!("thread pool: {e}")))
    }
}

/// One chain on the given groups and spec, summarized by majority vote.
pub fn fit_model(
    stats: &GroupStats,
    spec: &ModelSpec,
    chain: &ChainConfig,
    hyper: &ShrinkageHyper,
    mode: PriorOddsMode,
) -> Result<FitResult> {
    let prior = PriorConfig::defaults_for(stats.p(), stats.mean_n(), mode);
    let out = run_chain(stats, spec, chain, hyper, &prior)?;
    majority_vote(&out.trace, spec)
}

/// Fits every two-group model and records the size of each shared component.
/// All pairs start out active; [`prune_components`] sets the flags.
pub fn pairwise_screen(stats: &GroupStats, cfg: &ScreenConfig) -> Result<ScreenReport> {
    let k = stats.groups();
    if k < 3 {
        return Err(BjnsError::invalid("pairwise screening needs at least three groups"));
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let local = ModelSpec::full(2)?;
    let joint = local.index_of(Component::from_groups(&[0, 1])).expect("in spec");
    let counts: Vec<Result<usize>> = cfg.pool()?.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(n, &(a, b))| {
                let chain = ChainConfig {
                    stream: n as u64 + 1,
                    ..cfg.pairwise
                };
                let fit = fit_model(&stats.select(&[a, b]), &local, &chain, &cfg.hyper, cfg.prior_mode)?;
                log::info!("pair {{{},{}}} fitted", a + 1, b + 1);
                Ok(fit.component_edge_counts()[joint].1)
            })
            .collect()
    });
    let entries = pairs
        .iter()
        .zip(counts)
        .map(|(&(a, b), count)| {
            Ok(ScreenEntry {
                component: vec![a + 1, b + 1],
                edge_count: count?,
                active: true,
                stage: Stage::Pairwise,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScreenReport { entries })
}

/// Flags inactive pairs and returns the candidate family: all singletons, the
/// active pairs, and every larger subset whose pairs are all active.
pub fn prune_components(report: &mut ScreenReport, rule: PruneRule, groups: usize) -> Result<ModelSpec> {
    if groups > MAX_FULL_GROUPS {
        return Err(BjnsError::Refused(format!(
            "closure over {groups} groups would enumerate 2^{groups} subsets"
        )));
    }
    let counts: Vec<usize> = report.stage(Stage::Pairwise).map(|e| e.edge_count).collect();
    let inactive = rule.inactive(&counts);
    let mut flags = inactive.into_iter();
    let mut dead = Vec::new();
    for entry in report.entries.iter_mut().filter(|e| e.stage == Stage::Pairwise) {
        entry.active = !flags.next().unwrap_or(false);
        if !entry.active {
            dead.push(entry.component());
        }
    }
    let extra: Vec<Component> = (1u64..1 << groups)
        .map(Component::from_mask)
        .filter(|c| c.len() >= 2 && !dead.iter().any(|d| d.is_subset_of(*c)))
        .collect();
    ModelSpec::singletons_with(groups, &extra)
}

fn round_entries(fit: &FitResult, rule: PruneRule, stage: Stage) -> (Vec<ScreenEntry>, Vec<Component>) {
    let joint: Vec<(Component, usize)> = fit
        .component_edge_counts()
        .into_iter()
        .filter(|(c, _)| !c.is_singleton())
        .collect();
    let inactive = rule.inactive(&joint.iter().map(|(_, n)| *n).collect::<Vec<_>>());
    let entries = joint
        .iter()
        .zip(&inactive)
        .map(|(&(c, n), &off)| ScreenEntry {
            component: c.labels(),
            edge_count: n,
            active: !off,
            stage,
        })
        .collect();
    let removed = joint.iter().zip(&inactive).filter(|(_, &off)| off).map(|((c, _), _)| *c).collect();
    (entries, removed)
}

/// Refits `spec` and drops inactive joint components until nothing changes
/// or `max_rounds` fits have been pruned. Singletons are never dropped.
pub fn reduce_from(
    stats: &GroupStats,
    spec: ModelSpec,
    cfg: &ScreenConfig,
    report: &mut ScreenReport,
) -> Result<FitResult> {
    if cfg.max_rounds == 0 {
        return Err(BjnsError::invalid("max_rounds must be at least 1"));
    }
    let mut spec = spec;
    for round in 1..=cfg.max_rounds {
        let chain = ChainConfig {
            stream: REDUCED_STREAM_BASE + round as u64,
            ..cfg.reduced
        };
        let fit = fit_model(stats, &spec, &chain, &cfg.hyper, cfg.prior_mode)?;
        let (mut entries, removed) = round_entries(&fit, cfg.rule, Stage::Reduced(round));
        if removed.is_empty() {
            entries.iter_mut().for_each(|e| e.stage = Stage::Final);
            report.entries.extend(entries);
            return Ok(fit);
        }
        report.entries.extend(entries);
        let kept: Vec<Component> = spec
            .components()
            .iter()
            .copied()
            .filter(|c| !c.is_singleton() && !removed.contains(c))
            .collect();
        spec = ModelSpec::singletons_with(stats.groups(), &kept)?;
        log::info!("round {round}: {} components remain", spec.len());
    }
    let chain = ChainConfig {
        stream: REDUCED_STREAM_BASE,
        ..cfg.reduced
    };
    let fit = fit_model(stats, &spec, &chain, &cfg.hyper, cfg.prior_mode)?;
    let (mut entries, _) = round_entries(&fit, cfg.rule, Stage::Final);
    entries.iter_mut().for_each(|e| e.active = true);
    report.entries.extend(entries);
    Ok(fit)
}

/// Pairwise screening, closure, then [`reduce_from`] on the candidate family.
pub fn iterative_reduce(stats: &GroupStats, cfg: &ScreenConfig) -> Result<(FitResult, ScreenReport)> {
    let mut report = pairwise_screen(stats, cfg)?;
    let spec = prune_components(&mut report, cfg.rule, stats.groups())?;
    log::info!("candidate family has {} components", spec.len());
    let fit = cfg.pool()?.install(|| reduce_from(stats, spec, cfg, &mut report))?;
    Ok((fit, report))
}
