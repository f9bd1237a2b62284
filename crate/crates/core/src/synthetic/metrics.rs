//! Edge-recovery metrics over the upper triangle.

use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};
use crate::model::{Component, ModelSpec};

/// Which matrix to score: a group's precision matrix or one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Group(usize),
    Component(Component),
}

impl Target {
    fn hit(&self, selected: Option<Component>) -> bool {
        match (*self, selected) {
            (Target::Group(k), Some(c)) => c.contains(k),
            (Target::Component(t), Some(c)) => t == c,
            (_, None) => false,
        }
    }

    /// "Omega1" or "Psi12".
    pub fn label(&self) -> String {
        match self {
            Target::Group(k) => format!("Omega{}", k + 1),
            Target::Component(c) => format!("Psi{}", c.tag()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sp: f64,
    pub se: f64,
    pub mcc: f64,
}

impl Metrics {
    /// SP and SE are 1 when they have nothing to measure; MCC is 0 when its
    /// denominator vanishes.
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let (tpf, tnf, fpf, fnf) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
        let den = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
        let mcc = if den == 0.0 { 0.0 } else { (tpf * tnf - fpf * fnf) / den };
        Metrics {
            tp,
            tn,
            fp,
            fn_,
            sp: ratio(tn, tn + fp),
            se: ratio(tp, tp + fn_),
            mcc,
        }
    }
}

/// Confusion counts of one target over all edges.
pub fn score(selected: &[Option<Component>], truth: &[Option<Component>], target: Target) -> Result<Metrics> {
    if selected.len() != truth.len() {
        return Err(BjnsError::invalid(format!(
            "selection covers {} edges, truth covers {}",
            selected.len(),
            truth.len()
        )));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (s, t) in selected.iter().zip(truth) {
        match (target.hit(*s), target.hit(*t)) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, tn, fp, fn_))
}

/// Every group matrix followed by every component of `truth_spec` (in spec order).
pub fn score_all(
    selected: &[Option<Component>],
    truth: &[Option<Component>],
    truth_spec: &ModelSpec,
) -> Result<Vec<(Target, Metrics)>> {
    (0..truth_spec.groups())
        .map(Target::Group)
        .chain(truth_spec.components().iter().map(|&c| Target::Component(c)))
        .map(|t| Ok((t, score(selected, truth, t)?)))
        .collect()
}
