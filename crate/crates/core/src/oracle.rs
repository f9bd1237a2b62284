//! Dense reference computations for small problems.
//!
//! These build the full quadratic form
//!
//! ```text
//! sum_k w_k tr[Omega_k^2 S_k] = Theta' U Theta + 2 Theta' A Delta + Delta' D Delta
//! ```
//!
//! as explicit matrices, and enumerate the exact posterior over sparsity
//! patterns when the diagonals and shrinkage are held fixed. Nothing here is
//! used by the sampler; the point is to have an independent route to check
//! the sampler against.
//!
//! Layout: `Theta` stacks one block of `p(p-1)/2` upper-triangle entries per
//! component, in spec order; `Delta` stacks one block of `p` diagonals per
//! group.

use nalgebra::{DMatrix, DVector};

use crate::error::{BjnsError, Result};
use crate::model::{edge_count, edge_index, edges, DiagState, ModelSpec, ThetaState};
use crate::stats::GroupStats;

pub const MAX_ORACLE_P: usize = 50;
pub const MAX_ORACLE_COMPONENTS: usize = 15;
/// Cap on the side of the dense off-diagonal block.
pub const MAX_ORACLE_DIM: usize = 4096;

/// Per-group off-diagonal block: entry ((a,b),(c,d)) is `s_aa + s_bb` on the
/// diagonal, the covariance between the two unshared indices when the edges
/// share exactly one index, and zero otherwise.
pub fn offdiag_block(s: &DMatrix<f64>) -> DMatrix<f64> {
    let p = s.nrows();
    let m = edge_count(p);
    let list: Vec<(usize, usize)> = edges(p).collect();
    DMatrix::from_fn(m, m, |r, c| {
        let (a, b) = list[r];
        let (x, y) = list[c];
        if (a, b) == (x, y) {
            s[(a, a)] + s[(b, b)]
        } else if b == y {
            s[(a, x)]
        } else if a == x {
            s[(b, y)]
        } else if b == x {
            s[(a, y)]
        } else if a == y {
            s[(b, x)]
        } else {
            0.0
        }
    })
}

/// Per-group cross block: `A^k * diag` is the vector with entries `s_ab (d_a + d_b)`.
pub fn cross_block(s: &DMatrix<f64>) -> DMatrix<f64> {
    let p = s.nrows();
    let mut a = DMatrix::zeros(edge_count(p), p);
    for (e, (i, j)) in edges(p).enumerate() {
        a[(e, i)] = s[(i, j)];
        a[(e, j)] = s[(i, j)];
    }
    a
}

/// The materialized quadratic form for one spec.
#[derive(Clone, Debug)]
pub struct DenseQuadForm {
    pub p: usize,
    pub groups: usize,
    pub components: usize,
    /// Off-diagonal block (`Upsilon`).
    pub upsilon: DMatrix<f64>,
    /// Cross block (`A`), so that `a = A * Delta`.
    pub cross: DMatrix<f64>,
    /// Diagonal block (`D`).
    pub diag: DMatrix<f64>,
    /// Unweighted per-group off-diagonal blocks (`B^k`).
    pub blocks: Vec<DMatrix<f64>>,
}

/// Dense blocks with unit group weights.
pub fn materialize_oracle(stats: &GroupStats, spec: &ModelSpec) -> Result<DenseQuadForm> {
    materialize_weighted(stats, spec, &vec![1.0; stats.groups()])
}

/// Dense blocks with group `k` weighted by `weights[k]` (use `n_k` to get the
/// pseudo-likelihood scaling).
pub fn materialize_weighted(stats: &GroupStats, spec: &ModelSpec, weights: &[f64]) -> Result<DenseQuadForm> {
    let p = stats.p();
    let groups = stats.groups();
    let comps = spec.len();
    let m = edge_count(p);
    if p > MAX_ORACLE_P || comps > MAX_ORACLE_COMPONENTS || m * comps > MAX_ORACLE_DIM {
        return Err(BjnsError::Refused(format!(
            "dense oracle limited to p <= {MAX_ORACLE_P}, <= {MAX_ORACLE_COMPONENTS} components and \
             dimension <= {MAX_ORACLE_DIM}; got p={p}, {comps} components"
        )));
    }
    if spec.groups() != groups || weights.len() != groups {
        return Err(BjnsError::invalid("group counts of data, spec and weights differ"));
    }

    let blocks: Vec<DMatrix<f64>> = (0..groups).map(|k| offdiag_block(stats.cov(k))).collect();
    let crosses: Vec<DMatrix<f64>> = (0..groups).map(|k| cross_block(stats.cov(k))).collect();

    let mut upsilon = DMatrix::zeros(m * comps, m * comps);
    let mut cross = DMatrix::zeros(m * comps, groups * p);
    for (c1, r1) in spec.components().iter().enumerate() {
        for (c2, r2) in spec.components().iter().enumerate() {
            for k in 0..groups {
                if r1.contains(k) && r2.contains(k) {
                    let mut view = upsilon.view_mut((c1 * m, c2 * m), (m, m));
                    view += &blocks[k] * weights[k];
                }
            }
        }
        for k in 0..groups {
            if r1.contains(k) {
                let mut view = cross.view_mut((c1 * m, k * p), (m, p));
                view += &crosses[k] * weights[k];
            }
        }
    }
    let mut diag = DMatrix::zeros(groups * p, groups * p);
    for k in 0..groups {
        for i in 0..p {
            diag[(k * p + i, k * p + i)] = weights[k] * stats.cov(k)[(i, i)];
        }
    }
    Ok(DenseQuadForm {
        p,
        groups,
        components: comps,
        upsilon,
        cross,
        diag,
        blocks,
    })
}

impl DenseQuadForm {
    pub fn edge_count(&self) -> usize {
        edge_count(self.p)
    }

    /// Position of (component, edge) inside `Theta`.
    pub fn theta_position(&self, component: usize, i: usize, j: usize) -> usize {
        component * self.edge_count() + edge_index(self.p, i, j)
    }

    pub fn theta_vector(&self, theta: &ThetaState) -> DVector<f64> {
        let m = self.edge_count();
        let mut v = DVector::zeros(m * self.components);
        for (e, coef) in theta.as_slice().iter().enumerate() {
            if let Some(c) = coef.component {
                v[c * m + e] = coef.value;
            }
        }
        v
    }

    pub fn delta_vector(&self, delta: &DiagState) -> DVector<f64> {
        DVector::from_iterator(
            self.groups * self.p,
            (0..self.groups).flat_map(|k| delta.group(k).to_vec()),
        )
    }

    /// The linear term `a = A * Delta`.
    pub fn a_vector(&self, delta: &DiagState) -> DVector<f64> {
        &self.cross * self.delta_vector(delta)
    }

    pub fn quad_form(&self, theta: &ThetaState, delta: &DiagState) -> f64 {
        let t = self.theta_vector(theta);
        let d = self.delta_vector(delta);
        t.dot(&(&self.upsilon * &t)) + 2.0 * t.dot(&(&self.cross * &d)) + d.dot(&(&self.diag * &d))
    }
}

/// `sum_k w_k tr[Omega_k^2 S_k]` by direct matrix algebra.
pub fn direct_trace_form(
    stats: &GroupStats,
    spec: &ModelSpec,
    theta: &ThetaState,
    delta: &DiagState,
    weights: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..stats.groups() {
        let omega = crate::model::assemble_omega(theta, delta, spec, k)?;
        total += weights[k] * (&omega * &omega * stats.cov(k)).trace();
    }
    Ok(total)
}

/// A sparsity pattern: per edge (row-major), `None` for absent or the active
/// component index.
pub type Pattern = Vec<Option<usize>>;

/// Decodes pattern number `code` in base `components + 1`, edge 0 least significant.
pub fn decode_pattern(mut code: usize, edges: usize, components: usize) -> Pattern {
    let base = components + 1;
    (0..edges)
        .map(|_| {
            let digit = code % base;
            code /= base;
            digit.checked_sub(1)
        })
        .collect()
}

pub fn encode_pattern(pattern: &[Option<usize>], components: usize) -> usize {
    let base = components + 1;
    pattern
        .iter()
        .rev()
        .fold(0, |acc, cat| acc * base + cat.map_or(0, |c| c + 1))
}

/// Exact posterior over all sparsity patterns with the diagonals fixed at
/// `delta` and every shrinkage parameter fixed at `lambda`:
///
/// ```text
/// P(l) ∝ prior(l) |Λ_ll|^{1/2} |(U + Λ)_ll|^{-1/2} exp{ ½ h_l' (U + Λ)_ll^{-1} h_l }
/// ```
///
/// with `U` and `h = A Delta` weighted by the group sample sizes.
/// `log_prior` receives the pattern and returns its unnormalized log prior.
/// Returns probabilities indexed by [`encode_pattern`].
pub fn pattern_posterior(
    stats: &GroupStats,
    spec: &ModelSpec,
    delta: &DiagState,
    lambda: f64,
    log_prior: impl Fn(&[Option<usize>]) -> f64,
) -> Result<Vec<f64>> {
    let m = edge_count(stats.p());
    let comps = spec.len();
    let total = (comps + 1)
        .checked_pow(m as u32)
        .filter(|&t| t <= 1 << 20)
        .ok_or_else(|| BjnsError::Refused("too many patterns to enumerate".into()))?;
    let weights: Vec<f64> = stats.sizes().iter().map(|&n| n as f64).collect();
    let dense = materialize_weighted(stats, spec, &weights)?;
    let h = dense.a_vector(delta);

    let mut log_mass = Vec::with_capacity(total);
    for code in 0..total {
        let pattern = decode_pattern(code, m, comps);
        let idx: Vec<usize> = pattern
            .iter()
            .enumerate()
            .filter_map(|(e, cat)| cat.map(|c| c * m + e))
            .collect();
        let d = idx.len();
        let mut lp = log_prior(&pattern) + 0.5 * d as f64 * lambda.ln();
        if d > 0 {
            let sub = DMatrix::from_fn(d, d, |r, c| {
                dense.upsilon[(idx[r], idx[c])] + if r == c { lambda } else { 0.0 }
            });
            let hl = DVector::from_iterator(d, idx.iter().map(|&i| h[i]));
            let chol = sub
                .cholesky()
                .ok_or_else(|| BjnsError::Numeric("pattern block not positive definite".into()))?;
            let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            let solved = chol.solve(&hl);
            lp += -0.5 * log_det + 0.5 * hl.dot(&solved);
        }
        log_mass.push(lp);
    }
    let max = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_mass.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v /= sum);
    Ok(probs)
}

/// Log prior implied by the literal mixture weights: each present entry
/// contributes `½ log(2π / λ)`.
pub fn literal_log_prior(lambda: f64) -> impl Fn(&[Option<usize>]) -> f64 {
    move |pattern| {
        let d = pattern.iter().filter(|c| c.is_some()).count();
        0.5 * d as f64 * (2.0 * std::f64::consts::PI / lambda).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EdgeCoefficient;
    use crate::stats::compute_group_stats;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_group_p2_blocks() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 5.0]);
        let stats = GroupStats::from_covariances(vec![4], vec![s]).unwrap();
        let dense = materialize_oracle(&stats, &ModelSpec::full(1).unwrap()).unwrap();
        assert_eq!(dense.upsilon, DMatrix::from_element(1, 1, 7.0));
        assert_eq!(dense.diag, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0])));
    }

    #[test]
    fn zero_theta_reduces_to_diagonal_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<DMatrix<f64>> = (0..2).map(|_| DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0))).collect();
        let stats = compute_group_stats(&data, false).unwrap();
        let spec = ModelSpec::full(2).unwrap();
        let dense = materialize_oracle(&stats, &spec).unwrap();
        let delta = DiagState::from_rows(vec![vec![1.0, 2.0, 0.5, 1.5], vec![0.7, 0.9, 1.1, 3.0]]).unwrap();
        let q = dense.quad_form(&ThetaState::empty(4), &delta);
        let expected: f64 = (0..2)
            .flat_map(|k| (0..4).map(move |i| (k, i)))
            .map(|(k, i)| stats.cov(k)[(i, i)] * delta.get(k, i).powi(2))
            .sum();
        assert!((q - expected).abs() < 1e-12);
    }

    #[test]
    fn guard_refuses_large_problems() {
        let stats = GroupStats::from_covariances(vec![3], vec![DMatrix::identity(60, 60)]).unwrap();
        assert!(matches!(
            materialize_oracle(&stats, &ModelSpec::full(1).unwrap()),
            Err(BjnsError::Refused(_))
        ));
    }

    #[test]
    fn pattern_codes_round_trip() {
        for code in 0..64 {
            let pat = decode_pattern(code, 3, 3);
            assert_eq!(encode_pattern(&pat, 3), code);
        }
        assert_eq!(decode_pattern(1, 3, 3), vec![Some(0), None, None]);
    }

    #[test]
    fn single_edge_posterior_matches_hand_formula() {
        // p = 2, K = 1: two patterns; closed form for the one-dimensional integral.
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let stats = GroupStats::from_covariances(vec![10], vec![s]).unwrap();
        let spec = ModelSpec::full(1).unwrap();
        let delta = DiagState::from_rows(vec![vec![1.5, 0.5]]).unwrap();
        let lambda = 3.0;
        let probs = pattern_posterior(&stats, &spec, &delta, lambda, |_| 0.0).unwrap();
        let prec = 10.0 * 3.0 + lambda;
        let h = 10.0 * 0.4 * (1.5 + 0.5);
        let on = (lambda / prec).sqrt() * (0.5 * h * h / prec).exp();
        assert!((probs[1] - on / (1.0 + on)).abs() < 1e-12);
        let mut theta = ThetaState::empty(2);
        theta.set(0, 1, EdgeCoefficient::active(0, 0.1));
        assert!(probs.iter().sum::<f64>() > 0.999_999);
    }
}
