//! Turning retained sweeps into selections, point estimates and intervals.
//!
//! Categories are numbered with 0 for "absent" and `l + 1` for spec
//! component `l`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};
use crate::model::{assemble_omega, edge_count, edge_index, edges, Component, DiagState, EdgeCoefficient, ModelSpec, ThetaState};

/// Minimum number of draws behind a credible interval.
pub const MIN_CI_DRAWS: usize = 20;

/// Per-edge category counts and retained values.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionTrace {
    p: usize,
    components: usize,
    groups: usize,
    planned: usize,
    retained: usize,
    counts: Vec<u32>,
    first_half: Vec<u32>,
    values: Vec<Vec<f64>>,
    diag_sum: Vec<f64>,
}

impl SelectionTrace {
    /// `planned` is the number of sweeps that will be recorded; it fixes
    /// where the first half of the trace ends.
    pub fn new(p: usize, components: usize, groups: usize, planned: usize) -> Self {
        let m = edge_count(p);
        SelectionTrace {
            p,
            components,
            groups,
            planned,
            retained: 0,
            counts: vec![0; m * (components + 1)],
            first_half: vec![0; m * (components + 1)],
            values: vec![Vec::new(); m * components],
            diag_sum: vec![0.0; groups * p],
        }
    }

    /// A trace holding counts only, one row per edge (absent first).
    pub fn from_counts(p: usize, components: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut trace = SelectionTrace::new(p, components, 0, 0);
        if rows.len() != edge_count(p) || rows.iter().any(|r| r.len() != components + 1) {
            return Err(BjnsError::invalid("count rows do not match the trace shape"));
        }
        let totals: Vec<u32> = rows.iter().map(|r| r.iter().sum()).collect();
        if totals.windows(2).any(|w| w[0] != w[1]) {
            return Err(BjnsError::invalid("every edge needs the same number of records"));
        }
        trace.retained = totals.first().copied().unwrap_or(0) as usize;
        trace.planned = trace.retained;
        trace.counts = rows.concat();
        Ok(trace)
    }

    pub fn record(&mut self, theta: &ThetaState, delta: &DiagState) {
        let width = self.components + 1;
        let first = self.retained < self.planned / 2;
        for (e, coef) in theta.as_slice().iter().enumerate() {
            let cat = coef.component.map_or(0, |c| c + 1);
            self.counts[e * width + cat] += 1;
            if first {
                self.first_half[e * width + cat] += 1;
            }
            if let Some(c) = coef.component {
                self.values[e * self.components + c].push(coef.value);
            }
        }
        for k in 0..self.groups {
            for (i, v) in delta.group(k).iter().enumerate() {
                self.diag_sum[k * self.p + i] += v;
            }
        }
        self.retained += 1;
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    /// Counts for edge `e`, absent first.
    pub fn counts(&self, e: usize) -> &[u32] {
        let width = self.components + 1;
        &self.counts[e * width..(e + 1) * width]
    }

    /// Counts over the first half of the retained sweeps.
    pub fn first_half_counts(&self, e: usize) -> &[u32] {
        let width = self.components + 1;
        &self.first_half[e * width..(e + 1) * width]
    }

    pub fn first_half_len(&self) -> usize {
        self.retained.min(self.planned / 2)
    }

    /// Retained nonzero draws of component `component` at edge `e`.
    pub fn values(&self, e: usize, component: usize) -> &[f64] {
        &self.values[e * self.components + component]
    }

    /// Posterior mean of diagonal `i` in group `k`, if any diagonals were recorded.
    pub fn diag_mean(&self, k: usize, i: usize) -> Option<f64> {
        (self.groups > 0 && self.retained > 0).then(|| self.diag_sum[k * self.p + i] / self.retained as f64)
    }
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval at `level` from the draws of one component at edge (i, j).
pub fn credible_interval(trace: &SelectionTrace, i: usize, j: usize, component: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BjnsError::invalid(format!("credible level {level} not in (0, 1)")));
    }
    if i >= j || j >= trace.p || component >= trace.components {
        return Err(BjnsError::invalid("edge or component out of range"));
    }
    interval_of(trace.values(edge_index(trace.p, i, j), component), level)
}

fn interval_of(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < MIN_CI_DRAWS {
        return Err(BjnsError::NotEnoughSamples {
            needed: MIN_CI_DRAWS,
            available: draws.len(),
        });
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok((quantile_sorted(&sorted, alpha / 2.0), quantile_sorted(&sorted, 1.0 - alpha / 2.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    /// 1-based.
    pub i: usize,
    /// 1-based.
    pub j: usize,
    /// 1-based group labels of the selected component, or null when absent.
    pub component: Option<Vec<usize>>,
    pub freq: f64,
    pub est: f64,
    pub ci: Option<[f64; 2]>,
}

impl EdgeRecord {
    pub fn selected(&self) -> Option<Component> {
        self.component
            .as_ref()
            .map(|labels| Component::from_groups(&labels.iter().map(|l| l - 1).collect::<Vec<_>>()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAdjacency {
    /// 1-based.
    pub group: usize,
    /// 1-based (i, j) pairs with i < j.
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p: usize,
    pub spec: ModelSpec,
    pub retained: usize,
    pub credible_level: f64,
    pub edges: Vec<EdgeRecord>,
    pub adjacency: Vec<GroupAdjacency>,
    /// Posterior mean diagonals, one row per group.
    pub diagonal: Vec<Vec<f64>>,
}

/// Most frequent category per edge. Ties go to "absent", then to the lowest
/// component index.
pub fn majority_vote(trace: &SelectionTrace, spec: &ModelSpec) -> Result<FitResult> {
    majority_vote_at(trace, spec, 0.95)
}

pub fn majority_vote_at(trace: &SelectionTrace, spec: &ModelSpec, level: f64) -> Result<FitResult> {
    if trace.retained == 0 {
        return Err(BjnsError::invalid("cannot summarize an empty trace"));
    }
    if spec.len() != trace.components {
        return Err(BjnsError::invalid("spec and trace disagree on the number of components"));
    }
    let p = trace.p;
    let mut records = Vec::with_capacity(edge_count(p));
    for (e, (i, j)) in edges(p).enumerate() {
        let counts = trace.counts(e);
        let mut best = 0;
        for (cat, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = cat;
            }
        }
        let freq = counts[best] as f64 / trace.retained as f64;
        let record = if best == 0 {
            EdgeRecord {
                i: i + 1,
                j: j + 1,
                component: None,
                freq,
                est: 0.0,
                ci: None,
            }
        } else {
            let comp = best - 1;
            let draws = trace.values(e, comp);
            // count-only traces carry no values
            let est = if draws.is_empty() { 0.0 } else { draws.iter().sum::<f64>() / draws.len() as f64 };
            EdgeRecord {
                i: i + 1,
                j: j + 1,
                component: Some(spec.component(comp).labels()),
                freq,
                est,
                ci: interval_of(draws, level).ok().map(|(lo, hi)| [lo, hi]),
            }
        };
        records.push(record);
    }
    let adjacency = (0..spec.groups())
        .map(|k| GroupAdjacency {
            group: k + 1,
            edges: records
                .iter()
                .filter(|r| r.selected().is_some_and(|c| c.contains(k)))
                .map(|r| [r.i, r.j])
                .collect(),
        })
        .collect();
    let diagonal = (0..spec.groups())
        .map(|k| (0..p).map(|i| trace.diag_mean(k, i).unwrap_or(1.0)).collect())
        .collect();
    Ok(FitResult {
        p,
        spec: spec.clone(),
        retained: trace.retained,
        credible_level: level,
        edges: records,
        adjacency,
        diagonal,
    })
}

impl FitResult {
    /// Selected component per edge, row-major.
    pub fn selection(&self) -> Vec<Option<Component>> {
        self.edges.iter().map(EdgeRecord::selected).collect()
    }

    /// Point estimates as a state over this fit's spec.
    pub fn theta(&self) -> Result<ThetaState> {
        let mut theta = ThetaState::empty(self.p);
        for rec in &self.edges {
            if let Some(comp) = rec.selected() {
                let idx = self
                    .spec
                    .index_of(comp)
                    .ok_or_else(|| BjnsError::invalid(format!("component {comp} is not in the fit's spec")))?;
                if rec.est != 0.0 {
                    theta.set(rec.i - 1, rec.j - 1, EdgeCoefficient::active(idx, rec.est));
                }
            }
        }
        Ok(theta)
    }

    /// Number of selected edges per spec component, in spec order.
    pub fn component_edge_counts(&self) -> Vec<(Component, usize)> {
        let selection = self.selection();
        self.spec
            .components()
            .iter()
            .map(|&c| (c, selection.iter().filter(|s| **s == Some(c)).count()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != edge_count(self.p) || self.diagonal.len() != self.spec.groups() {
            return Err(BjnsError::invalid("fit does not match its own dimensions"));
        }
        for (rec, (i, j)) in self.edges.iter().zip(edges(self.p)) {
            if (rec.i, rec.j) != (i + 1, j + 1) {
                return Err(BjnsError::invalid(format!("edge record ({}, {}) out of order", rec.i, rec.j)));
            }
            if let Some(c) = rec.selected() {
                if self.spec.index_of(c).is_none() {
                    return Err(BjnsError::invalid(format!("edge ({i}, {j}) uses component {c} not in the spec")));
                }
            }
        }
        self.spec.validate().map_err(BjnsError::InvalidSpec)
    }
}

/// Estimated precision matrix of every group.
pub fn estimate_matrices(fit: &FitResult) -> Result<Vec<DMatrix<f64>>> {
    let theta = fit.theta()?;
    let delta = DiagState::from_rows(fit.diagonal.clone())?;
    (0..fit.spec.groups())
        .map(|k| assemble_omega(&theta, &delta, &fit.spec, k))
        .collect()
}

/// Fraction of edges whose selected component equals the true one.
pub fn kappa(selected: &[Option<Component>], truth: &[Option<Component>]) -> Result<f64> {
    if selected.len() != truth.len() || truth.is_empty() {
        return Err(BjnsError::invalid("selection and truth cover different edge sets"));
    }
    let hits = selected.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Components present in one sweep's state.
pub fn state_selection(theta: &ThetaState, spec: &ModelSpec) -> Vec<Option<Component>> {
    theta
        .as_slice()
        .iter()
        .map(|c| c.component.map(|l| spec.component(l)))
        .collect()
}
