//! The simulation designs: a perturbed AR(2) chain, random shared/unique
//! supports, and the six-group block design.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use super::GroundTruth;
use crate::error::{BjnsError, Result};
use crate::model::{edge_count, edges, Component, EdgeCoefficient, ModelSpec, ThetaState};

/// Magnitudes of generated edges; signs are random.
pub const SIGNAL_RANGE: (f64, f64) = (0.4, 0.6);

fn signal<R: Rng + ?Sized>(range: (f64, f64), rng: &mut R) -> f64 {
    let magnitude = rng.random_range(range.0..=range.1);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Unit diagonal, 0.5 on the first off-diagonal band and 0.25 on the second.
pub fn gen_ar2(p: usize) -> Result<DMatrix<f64>> {
    if p < 3 {
        return Err(BjnsError::invalid("AR(2) design needs p >= 3"));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.25,
        _ => 0.0,
    }))
}

fn present_edges(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    edges(m.nrows()).filter(|&(i, j)| m[(i, j)] != 0.0).collect()
}

/// Picks `count` distinct items, returned in their original order.
fn choose<T: Copy, R: Rng + ?Sized>(items: &[T], count: usize, rng: &mut R) -> Result<Vec<T>> {
    if count > items.len() {
        return Err(BjnsError::invalid(format!(
            "cannot pick {count} edges from {} candidates",
            items.len()
        )));
    }
    let mut idx = sample_indices(rng, items.len(), count).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| items[i]).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub matrix: DMatrix<f64>,
    /// Edges of the base that were zeroed, row-major.
    pub removed: Vec<(usize, usize)>,
    /// New edges, row-major; none of them is present in the base.
    pub added: Vec<(usize, usize)>,
}

/// Zeros `remove_count` random edges of `base` and places `add_count` new
/// edges, drawn from `±range`, at positions that are zero in `base` and not
/// listed in `forbidden`.
pub fn perturb_graph<R: Rng + ?Sized>(
    base: &DMatrix<f64>,
    remove_count: usize,
    add_count: usize,
    range: (f64, f64),
    forbidden: &[(usize, usize)],
    rng: &mut R,
) -> Result<Perturbation> {
    if !base.is_square() {
        return Err(BjnsError::invalid("base matrix must be square"));
    }
    let present = present_edges(base);
    let removed = choose(&present, remove_count, rng)?;
    let blocked: HashSet<(usize, usize)> = forbidden.iter().copied().collect();
    let free: Vec<(usize, usize)> = edges(base.nrows())
        .filter(|&(i, j)| base[(i, j)] == 0.0 && !blocked.contains(&(i, j)))
        .collect();
    let added = choose(&free, add_count, rng)?;
    let mut matrix = base.clone();
    for &(i, j) in &removed {
        matrix[(i, j)] = 0.0;
        matrix[(j, i)] = 0.0;
    }
    for &(i, j) in &added {
        let v = signal(range, rng);
        matrix[(i, j)] = v;
        matrix[(j, i)] = v;
    }
    Ok(Perturbation { matrix, removed, added })
}

fn put(theta: &mut ThetaState, edges: &[(usize, usize)], component: usize, value: impl Fn(usize, usize) -> f64) {
    for &(i, j) in edges {
        theta.set(i, j, EdgeCoefficient::active(component, value(i, j)));
    }
}

fn rounded(x: f64) -> usize {
    x.round() as usize
}

/// Four groups built from an AR(2) matrix by successive perturbation:
/// group 1 is AR(2), group 2 swaps `p/4` of its edges, group 3 drops `p/2` of
/// the edges shared by groups 1 and 2 and gains `p/2` new ones, and group 4
/// has only new edges. The true components are {1}, {2}, {3}, {4}, {1,2} and
/// {1,2,3}.
pub fn ar2_chain_k4<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<GroundTruth> {
    let ar2 = gen_ar2(p)?;
    let quarter = rounded(p as f64 / 4.0);
    let half = rounded(p as f64 / 2.0);
    let band = 2 * p - 3;
    let rest = band
        .checked_sub(quarter + half)
        .ok_or_else(|| BjnsError::invalid("p too small for the AR(2) chain"))?;
    if band + quarter + half + rest > edge_count(p) {
        return Err(BjnsError::invalid("p too small for the AR(2) chain"));
    }

    // group 2
    let step = perturb_graph(&ar2, quarter, quarter, SIGNAL_RANGE, &[], rng)?;
    let only1 = step.removed.clone();
    let only2 = step.added.clone();
    let removed: HashSet<_> = only1.iter().copied().collect();
    let shared: Vec<(usize, usize)> = present_edges(&ar2).into_iter().filter(|e| !removed.contains(e)).collect();

    // group 3
    let shared12 = choose(&shared, half, rng)?;
    let pair: HashSet<_> = shared12.iter().copied().collect();
    let shared123: Vec<(usize, usize)> = shared.iter().copied().filter(|e| !pair.contains(e)).collect();
    let mut used: HashSet<(usize, usize)> = present_edges(&ar2).into_iter().chain(only2.iter().copied()).collect();
    let free: Vec<(usize, usize)> = edges(p).filter(|e| !used.contains(e)).collect();
    let only3 = choose(&free, half, rng)?;
    used.extend(only3.iter().copied());

    // group 4
    let free: Vec<(usize, usize)> = edges(p).filter(|e| !used.contains(e)).collect();
    let only4 = choose(&free, rest, rng)?;

    let c12 = Component::from_groups(&[0, 1]);
    let c123 = Component::from_groups(&[0, 1, 2]);
    let spec = ModelSpec::singletons_with(4, &[c12, c123])?;
    let mut theta = ThetaState::empty(p);
    let base_value = |i: usize, j: usize| ar2[(i, j)];
    put(&mut theta, &only1, spec.singleton_index(0), base_value);
    put(&mut theta, &shared12, spec.index_of(c12).expect("in spec"), base_value);
    put(&mut theta, &shared123, spec.index_of(c123).expect("in spec"), base_value);
    for (edges, group) in [(&only2, 1), (&only3, 2), (&only4, 3)] {
        let idx = spec.singleton_index(group);
        for &(i, j) in edges.iter() {
            let v = if group == 1 { step.matrix[(i, j)] } else { signal(SIGNAL_RANGE, rng) };
            theta.set(i, j, EdgeCoefficient::active(idx, v));
        }
    }
    GroundTruth::from_decomposition(spec, theta)
}

/// `K` groups with `1 - sparsity` edge density each. A `shared_fraction` of
/// each group's edges is common to all groups; the remaining edges are
/// unique, with disjoint supports.
pub fn gen_random_shared<R: Rng + ?Sized>(
    p: usize,
    sparsity: f64,
    shared_fraction: f64,
    groups: usize,
    rng: &mut R,
) -> Result<GroundTruth> {
    if !(sparsity > 0.0 && sparsity < 1.0) || !(0.0..=1.0).contains(&shared_fraction) {
        return Err(BjnsError::invalid("sparsity must lie in (0, 1) and shared_fraction in [0, 1]"));
    }
    if groups == 0 || p < 2 {
        return Err(BjnsError::invalid("need at least one group and p >= 2"));
    }
    let m = edge_count(p);
    let per_group = rounded((1.0 - sparsity) * m as f64);
    let shared = rounded(per_group as f64 * shared_fraction);
    let unique = per_group - shared;
    let total = shared + groups * unique;
    if total > m {
        return Err(BjnsError::invalid(format!("{total} edges do not fit into {m} positions")));
    }
    let all = sample_indices(rng, m, total).into_vec();
    let positions: Vec<(usize, usize)> = edges(p).collect();

    let joint = Component::from_mask((1u64 << groups) - 1);
    let spec = if groups > 1 {
        ModelSpec::singletons_with(groups, &[joint])?
    } else {
        ModelSpec::full(1)?
    };
    let joint_idx = spec.index_of(joint).expect("in spec");
    let mut theta = ThetaState::empty(p);
    for (n, &e) in all.iter().enumerate() {
        let (i, j) = positions[e];
        let comp = if n < shared { joint_idx } else { spec.singleton_index((n - shared) / unique) };
        theta.set(i, j, EdgeCoefficient::active(comp, signal(SIGNAL_RANGE, rng)));
    }
    GroundTruth::from_decomposition(spec, theta)
}

/// Six groups. Three networks fill everything outside the bottom-right
/// `p/2` block and are shared by {1,2}, {3,4} and {5,6}; two networks fill
/// the block and are shared by {1,3,5} and {2,4,6}. Each network covers 8% of
/// its region and the networks of one kind have disjoint supports.
pub fn gen_block_k6<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<GroundTruth> {
    if p % 2 != 0 || p < 4 {
        return Err(BjnsError::invalid(format!("block design needs an even p >= 4, got {p}")));
    }
    let h = p / 2;
    let (inside, outside): (Vec<(usize, usize)>, Vec<(usize, usize)>) = edges(p).partition(|&(i, _)| i >= h);
    let col = rounded(0.08 * outside.len() as f64);
    let row = rounded(0.08 * inside.len() as f64);

    let columns = [[0, 1], [2, 3], [4, 5]].map(|g| Component::from_groups(&g));
    let rows = [[0, 2, 4], [1, 3, 5]].map(|g| Component::from_groups(&g));
    let extra: Vec<Component> = columns.iter().chain(&rows).copied().collect();
    let spec = ModelSpec::singletons_with(6, &extra)?;

    let mut theta = ThetaState::empty(p);
    let picks = sample_indices(rng, outside.len(), 3 * col).into_vec();
    for (n, &e) in picks.iter().enumerate() {
        let (i, j) = outside[e];
        let idx = spec.index_of(columns[n / col]).expect("in spec");
        theta.set(i, j, EdgeCoefficient::active(idx, signal(SIGNAL_RANGE, rng)));
    }
    let picks = sample_indices(rng, inside.len(), 2 * row).into_vec();
    for (n, &e) in picks.iter().enumerate() {
        let (i, j) = inside[e];
        let idx = spec.index_of(rows[n / row]).expect("in spec");
        theta.set(i, j, EdgeCoefficient::active(idx, signal(SIGNAL_RANGE, rng)));
    }
    GroundTruth::from_decomposition(spec, theta)
}
