//! Per-group sample statistics and the incrementally maintained products
//! `T[k] = S[k] * Omega[k]` that stand in for the full quadratic form.
//!
//! The Gibbs kernel never needs the off-diagonal block of the quadratic form
//! as a matrix. For edge (i, j) and group k it needs
//!
//! ```text
//! Omega[k][:, i]' S[k][:, j] + Omega[k][:, j]' S[k][:, i] = T[k][j, i] + T[k][i, j]
//! ```
//!
//! and the diagonal element `s_ii + s_jj`. Both are O(1) reads once `T` is
//! kept current, and a single-entry change of `Omega[k]` moves at most two
//! columns of `T[k]`, i.e. O(p) work.

use nalgebra::DMatrix;

use crate::error::{BjnsError, Result};
use crate::model::{assemble_omega, Component, DiagState, EdgeCoefficient, ModelSpec, ThetaState};

/// Sample sizes and sample covariances of each group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStats {
    n: Vec<usize>,
    cov: Vec<DMatrix<f64>>,
}

impl GroupStats {
    /// Wraps precomputed covariances. Each must be square, symmetric and
    /// share the same dimension.
    pub fn from_covariances(n: Vec<usize>, cov: Vec<DMatrix<f64>>) -> Result<Self> {
        if n.len() != cov.len() || cov.is_empty() {
            return Err(BjnsError::invalid("need one sample size per covariance and at least one group"));
        }
        let p = cov[0].nrows();
        for (k, s) in cov.iter().enumerate() {
            if s.nrows() != p || s.ncols() != p {
                return Err(BjnsError::invalid(format!(
                    "group {} covariance is {}x{}, expected {p}x{p}",
                    k + 1,
                    s.nrows(),
                    s.ncols()
                )));
            }
            let asym = (s - s.transpose()).abs().max();
            if asym > 1e-12 * s.abs().max().max(1.0) {
                return Err(BjnsError::invalid(format!("group {} covariance is not symmetric", k + 1)));
            }
            if (0..p).any(|i| s[(i, i)] < 0.0) {
                return Err(BjnsError::invalid(format!("group {} covariance has a negative diagonal", k + 1)));
            }
        }
        if p < 2 {
            return Err(BjnsError::invalid("need at least two variables"));
        }
        Ok(GroupStats { n, cov })
    }

    pub fn groups(&self) -> usize {
        self.cov.len()
    }

    pub fn p(&self) -> usize {
        self.cov[0].nrows()
    }

    pub fn n(&self, group: usize) -> usize {
        self.n[group]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n
    }

    pub fn mean_n(&self) -> f64 {
        self.n.iter().sum::<usize>() as f64 / self.n.len() as f64
    }

    pub fn cov(&self, group: usize) -> &DMatrix<f64> {
        &self.cov[group]
    }

    /// Restricts to a subset of groups, keeping their order.
    pub fn select(&self, groups: &[usize]) -> GroupStats {
        GroupStats {
            n: groups.iter().map(|&g| self.n[g]).collect(),
            cov: groups.iter().map(|&g| self.cov[g].clone()).collect(),
        }
    }
}

/// Sample covariances with divisor `n_k`, optionally after column-centering.
pub fn compute_group_stats(data: &[DMatrix<f64>], center: bool) -> Result<GroupStats> {
    let p = data
        .first()
        .ok_or_else(|| BjnsError::invalid("no groups supplied"))?
        .ncols();
    let mut n = Vec::with_capacity(data.len());
    let mut cov = Vec::with_capacity(data.len());
    for (k, y) in data.iter().enumerate() {
        if y.ncols() != p {
            return Err(BjnsError::invalid(format!(
                "group {} has {} variables, group 1 has {p}",
                k + 1,
                y.ncols()
            )));
        }
        if y.nrows() < 2 {
            return Err(BjnsError::invalid(format!(
                "group {} has {} observations, need at least 2",
                k + 1,
                y.nrows()
            )));
        }
        let rows = y.nrows();
        let mut y = y.clone();
        if center {
            for mut col in y.column_iter_mut() {
                let mean = col.sum() / rows as f64;
                col.add_scalar_mut(-mean);
            }
        }
        let mut s = y.tr_mul(&y) / rows as f64;
        // exact symmetry regardless of summation order
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        n.push(rows);
        cov.push(s);
    }
    GroupStats::from_covariances(n, cov)
}

/// Diagonal element of the off-diagonal quadratic block for component `comp`
/// at edge (i, j): the sum over member groups of `s_ii + s_jj`.
pub fn upsilon_diag(stats: &GroupStats, comp: Component, i: usize, j: usize) -> f64 {
    (0..stats.groups())
        .filter(|&k| comp.contains(k))
        .map(|k| {
            let s = stats.cov(k);
            s[(i, i)] + s[(j, j)]
        })
        .sum()
}

/// Keeps `T[k] = S[k] * Omega[k]` in step with one chain's state.
#[derive(Clone, Debug)]
pub struct QuadFormCache<'a> {
    stats: &'a GroupStats,
    spec: &'a ModelSpec,
    t: Vec<DMatrix<f64>>,
    theta_version: u64,
    diag_version: u64,
}

impl<'a> QuadFormCache<'a> {
    pub fn new(stats: &'a GroupStats, spec: &'a ModelSpec, theta: &ThetaState, delta: &DiagState) -> Result<Self> {
        if stats.groups() != spec.groups() {
            return Err(BjnsError::invalid(format!(
                "data has {} groups, spec has {}",
                stats.groups(),
                spec.groups()
            )));
        }
        if theta.p() != stats.p() || delta.p() != stats.p() || delta.groups() != stats.groups() {
            return Err(BjnsError::invalid("state dimensions do not match the data"));
        }
        let mut cache = QuadFormCache {
            stats,
            spec,
            t: Vec::new(),
            theta_version: 0,
            diag_version: 0,
        };
        cache.refresh(theta, delta)?;
        Ok(cache)
    }

    pub fn stats(&self) -> &'a GroupStats {
        self.stats
    }

    pub fn spec(&self) -> &'a ModelSpec {
        self.spec
    }

    /// Recomputes every `T[k]` from scratch.
    pub fn refresh(&mut self, theta: &ThetaState, delta: &DiagState) -> Result<()> {
        self.t = (0..self.spec.groups())
            .map(|k| Ok(self.stats.cov(k) * assemble_omega(theta, delta, self.spec, k)?))
            .collect::<Result<_>>()?;
        self.theta_version = theta.version();
        self.diag_version = delta.version();
        Ok(())
    }

    pub fn check(&self, theta: &ThetaState, delta: &DiagState) -> Result<()> {
        if theta.version() != self.theta_version || delta.version() != self.diag_version {
            return Err(BjnsError::StaleCache {
                cache_theta: self.theta_version,
                cache_diag: self.diag_version,
                state_theta: theta.version(),
                state_diag: delta.version(),
            });
        }
        Ok(())
    }

    pub fn t(&self, group: usize) -> &DMatrix<f64> {
        &self.t[group]
    }

    /// `Omega[k][:, i]' S[k][:, j] + Omega[k][:, j]' S[k][:, i]` at the current state.
    pub fn residual_inner(&self, theta: &ThetaState, delta: &DiagState, group: usize, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(BjnsError::invalid("residual_inner needs i != j"));
        }
        self.check(theta, delta)?;
        Ok(self.residual_inner_unchecked(group, i, j))
    }

    #[inline]
    pub(crate) fn residual_inner_unchecked(&self, group: usize, i: usize, j: usize) -> f64 {
        let t = &self.t[group];
        t[(j, i)] + t[(i, j)]
    }

    /// `sum_{j != i} omega_ij s_ij` for group `group`, read off `T[k][i, i]`.
    #[inline]
    pub(crate) fn offdiag_row_inner(&self, delta: &DiagState, group: usize, i: usize) -> f64 {
        self.t[group][(i, i)] - self.stats.cov(group)[(i, i)] * delta.get(group, i)
    }

    /// Replaces edge (i, j) in `theta` and moves `T` accordingly.
    pub fn apply_theta_update(&mut self, theta: &mut ThetaState, i: usize, j: usize, new: EdgeCoefficient) -> Result<()> {
        let old = theta.get(i, j);
        if old != new {
            for k in 0..self.spec.groups() {
                let change = new.omega_entry(self.spec, k) - old.omega_entry(self.spec, k);
                if change != 0.0 {
                    self.shift_offdiag(k, i, j, change);
                }
            }
        }
        let in_sync = theta.version() == self.theta_version;
        theta.set(i, j, new);
        if in_sync {
            self.theta_version = theta.version();
        }
        Ok(())
    }

    /// Replaces diagonal (group, i) in `delta` and moves column i of `T[group]`.
    pub fn apply_diag_update(&mut self, delta: &mut DiagState, group: usize, i: usize, new: f64) -> Result<()> {
        if !(new > 0.0) || !new.is_finite() {
            return Err(BjnsError::Numeric(format!("diagonal update to non-positive value {new}")));
        }
        let change = new - delta.get(group, i);
        if change != 0.0 {
            let s = self.stats.cov(group);
            let mut col = self.t[group].column_mut(i);
            col.axpy(change, &s.column(i), 1.0);
        }
        let in_sync = delta.version() == self.diag_version;
        delta.set(group, i, new);
        if in_sync {
            self.diag_version = delta.version();
        }
        Ok(())
    }

    fn shift_offdiag(&mut self, group: usize, i: usize, j: usize, change: f64) {
        let s = self.stats.cov(group);
        let t = &mut self.t[group];
        t.column_mut(j).axpy(change, &s.column(i), 1.0);
        t.column_mut(i).axpy(change, &s.column(j), 1.0);
    }

    /// Largest absolute difference between the cache and a full recomputation.
    pub fn drift(&self, theta: &ThetaState, delta: &DiagState) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.spec.groups() {
            let exact = self.stats.cov(k) * assemble_omega(theta, delta, self.spec, k)?;
            worst = worst.max((&exact - &self.t[k]).abs().max());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::edges;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stats(rng: &mut ChaCha8Rng, groups: usize, p: usize) -> GroupStats {
        let data: Vec<DMatrix<f64>> = (0..groups)
            .map(|_| DMatrix::from_fn(p + 3, p, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        compute_group_stats(&data, false).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, spec: &ModelSpec, p: usize) -> (ThetaState, DiagState) {
        let mut theta = ThetaState::empty(p);
        for (i, j) in edges(p) {
            if rng.random_bool(0.6) {
                let c = rng.random_range(0..spec.len());
                theta.set(i, j, EdgeCoefficient::active(c, rng.random_range(0.1..1.0)));
            }
        }
        let rows = (0..spec.groups())
            .map(|_| (0..p).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect();
        (theta, DiagState::from_rows(rows).unwrap())
    }

    #[test]
    fn covariance_examples() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let stats = compute_group_stats(&[y], false).unwrap();
        assert_eq!(stats.cov(0), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let y = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 4.0, 5.0]);
        let stats = compute_group_stats(&[y], true).unwrap();
        assert_eq!(stats.cov(0)[(1, 1)], 0.0);
        assert!((stats.cov(0)[(0, 0)] - 14.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn covariance_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-2.0..2.0));
        let stats = compute_group_stats(&[y.clone()], false).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for r in 0..5 {
                    acc += y[(r, a)] * y[(r, b)];
                }
                assert!((stats.cov(0)[(a, b)] - acc / 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_input_errors() {
        let a = DMatrix::<f64>::zeros(4, 3);
        let b = DMatrix::<f64>::zeros(4, 2);
        assert!(compute_group_stats(&[a.clone(), b], false).is_err());
        assert!(compute_group_stats(&[DMatrix::<f64>::zeros(1, 3)], false).is_err());
        assert!(compute_group_stats(&[], false).is_err());
    }

    #[test]
    fn residual_inner_simple_cases() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 2.0, -0.4, 0.2, -0.4, 1.5]);
        let stats = GroupStats::from_covariances(vec![10], vec![s.clone()]).unwrap();
        let spec = ModelSpec::full(1).unwrap();
        let theta = ThetaState::empty(3);
        let delta = DiagState::filled(1, 3, 1.0);
        let cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        assert!((cache.residual_inner(&theta, &delta, 0, 0, 2).unwrap() - 2.0 * 0.2).abs() < 1e-15);

        let delta = DiagState::from_rows(vec![vec![3.0, 1.0, 5.0]]).unwrap();
        let cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        let got = cache.residual_inner(&theta, &delta, 0, 0, 2).unwrap();
        assert!((got - (3.0 * 0.2 + 5.0 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn stale_cache_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stats = random_stats(&mut rng, 2, 4);
        let spec = ModelSpec::full(2).unwrap();
        let mut theta = ThetaState::empty(4);
        let delta = DiagState::filled(2, 4, 1.0);
        let cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        theta.set(0, 1, EdgeCoefficient::active(0, 0.3));
        assert!(matches!(
            cache.residual_inner(&theta, &delta, 0, 0, 1),
            Err(BjnsError::StaleCache { .. })
        ));
    }

    #[test]
    fn upsilon_diag_sums_member_groups() {
        let s1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let s2 = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        let stats = GroupStats::from_covariances(vec![5, 5], vec![s1, s2]).unwrap();
        assert_eq!(upsilon_diag(&stats, Component::from_groups(&[0, 1]), 0, 1), 10.0);
        let stats = GroupStats::from_covariances(vec![5], vec![DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(upsilon_diag(&stats, Component::singleton(0), 0, 2), 2.0);
    }

    #[test]
    fn theta_update_examples() {
        let stats = GroupStats::from_covariances(vec![5], vec![DMatrix::identity(3, 3)]).unwrap();
        let spec = ModelSpec::full(1).unwrap();
        let mut theta = ThetaState::empty(3);
        let delta = DiagState::filled(1, 3, 1.0);
        let mut cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        let before = cache.t(0).clone();

        cache.apply_theta_update(&mut theta, 0, 1, EdgeCoefficient::ABSENT).unwrap();
        assert_eq!(cache.t(0), &before);

        cache.apply_theta_update(&mut theta, 0, 1, EdgeCoefficient::active(0, 0.5)).unwrap();
        let diff = cache.t(0) - &before;
        let mut expected = DMatrix::zeros(3, 3);
        expected[(1, 0)] = 0.5;
        expected[(0, 1)] = 0.5;
        assert_eq!(diff, expected);
        cache.check(&theta, &delta).unwrap();
    }

    #[test]
    fn diag_update_examples() {
        let stats = GroupStats::from_covariances(vec![5], vec![DMatrix::identity(3, 3)]).unwrap();
        let spec = ModelSpec::full(1).unwrap();
        let theta = ThetaState::empty(3);
        let mut delta = DiagState::filled(1, 3, 1.0);
        let mut cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        let before = cache.t(0).clone();
        cache.apply_diag_update(&mut delta, 0, 2, 1.0).unwrap();
        assert_eq!(cache.t(0), &before);
        cache.apply_diag_update(&mut delta, 0, 2, 2.0).unwrap();
        assert_eq!(cache.t(0)[(2, 2)] - before[(2, 2)], 1.0);
        assert!(cache.apply_diag_update(&mut delta, 0, 2, 0.0).is_err());
    }

    #[test]
    fn random_updates_track_full_refresh() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = 7;
        let stats = random_stats(&mut rng, 3, p);
        let spec = ModelSpec::full(3).unwrap();
        let (mut theta, mut delta) = random_state(&mut rng, &spec, p);
        let mut cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        for step in 0..2000 {
            if step % 2 == 0 {
                let i = rng.random_range(0..p - 1);
                let j = rng.random_range(i + 1..p);
                let new = if rng.random_bool(0.3) {
                    EdgeCoefficient::ABSENT
                } else {
                    EdgeCoefficient::active(rng.random_range(0..spec.len()), rng.random_range(-1.0..1.0))
                };
                cache.apply_theta_update(&mut theta, i, j, new).unwrap();
            } else {
                let k = rng.random_range(0..3);
                let i = rng.random_range(0..p);
                cache.apply_diag_update(&mut delta, k, i, rng.random_range(0.2..3.0)).unwrap();
            }
        }
        cache.check(&theta, &delta).unwrap();
        assert!(cache.drift(&theta, &delta).unwrap() < 1e-8);
    }
}
