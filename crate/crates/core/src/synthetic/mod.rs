//! Synthetic ground truths, data generation and recovery metrics.

mod designs;
mod metrics;

pub use designs::{ar2_chain_k4, gen_ar2, gen_block_k6, gen_random_shared, perturb_graph, Perturbation, SIGNAL_RANGE};
pub use metrics::{score, score_all, Metrics, Target};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};
use crate::model::{assemble_omega, edge_count, edges, Component, DiagState, EdgeCoefficient, ModelSpec, ThetaState};

/// Smallest eigenvalue every generated precision matrix is lifted to.
pub const PD_TARGET: f64 = 0.1;

/// A known decomposition together with the precision matrices it implies.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    spec: ModelSpec,
    theta: ThetaState,
    omega: Vec<DMatrix<f64>>,
}

impl PartialEq for GroundTruth {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.theta.as_slice() == other.theta.as_slice() && self.omega == other.omega
    }
}

impl GroundTruth {
    /// Assembles each group's matrix from unit diagonals and lifts it to be
    /// positive definite.
    pub fn from_decomposition(spec: ModelSpec, theta: ThetaState) -> Result<Self> {
        let p = theta.p();
        let unit = DiagState::filled(spec.groups(), p, 1.0);
        let omega = (0..spec.groups())
            .map(|k| Ok(condition_pd(&assemble_omega(&theta, &unit, &spec, k)?, PD_TARGET)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundTruth { spec, theta, omega })
    }

    pub fn p(&self) -> usize {
        self.theta.p()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn theta(&self) -> &ThetaState {
        &self.theta
    }

    pub fn omega(&self, group: usize) -> &DMatrix<f64> {
        &self.omega[group]
    }

    pub fn omegas(&self) -> &[DMatrix<f64>] {
        &self.omega
    }

    /// True component per edge, row-major.
    pub fn selection(&self) -> Vec<Option<Component>> {
        self.theta
            .as_slice()
            .iter()
            .map(|c| c.component.map(|l| self.spec.component(l)))
            .collect()
    }

    /// Number of present edges (`d_t`).
    pub fn density(&self) -> usize {
        self.theta.density()
    }

    /// Smallest nonzero magnitude (`s_n`).
    pub fn min_signal(&self) -> f64 {
        self.present_values().fold(f64::INFINITY, |a, v| a.min(v.abs()))
    }

    /// Largest nonzero magnitude (`R_n`).
    pub fn max_signal(&self) -> f64 {
        self.present_values().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn present_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.theta.as_slice().iter().filter(|c| c.is_present()).map(|c| c.value)
    }

    /// Number of true edges in every spec component, in spec order.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.spec.len()];
        for c in self.theta.as_slice().iter().filter_map(|c| c.component) {
            sizes[c] += 1;
        }
        sizes
    }
}

#[derive(Serialize, Deserialize)]
struct TruthEdgeJson {
    i: usize,
    j: usize,
    component: Vec<usize>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TruthJson {
    p: usize,
    spec: ModelSpec,
    edges: Vec<TruthEdgeJson>,
    omega: Vec<Vec<Vec<f64>>>,
}

impl Serialize for GroundTruth {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let edges = edges(self.p())
            .zip(self.theta.as_slice())
            .filter_map(|((i, j), c)| {
                c.component.map(|l| TruthEdgeJson {
                    i: i + 1,
                    j: j + 1,
                    component: self.spec.component(l).labels(),
                    value: c.value,
                })
            })
            .collect();
        let omega = self
            .omega
            .iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect();
        TruthJson {
            p: self.p(),
            spec: self.spec.clone(),
            edges,
            omega,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroundTruth {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = TruthJson::deserialize(deserializer)?;
        let p = raw.p;
        let mut theta = ThetaState::empty(p);
        for e in &raw.edges {
            if e.i == 0 || e.i >= e.j || e.j > p {
                return Err(D::Error::custom(format!("truth edge ({}, {}) out of range", e.i, e.j)));
            }
            let groups: Vec<usize> = e.component.iter().map(|l| l.wrapping_sub(1)).collect();
            let idx = raw
                .spec
                .index_of(Component::from_groups(&groups))
                .ok_or_else(|| D::Error::custom(format!("truth edge uses component {:?} outside the spec", e.component)))?;
            if e.value == 0.0 || !e.value.is_finite() {
                return Err(D::Error::custom("truth edge values must be finite and nonzero"));
            }
            theta.set(e.i - 1, e.j - 1, EdgeCoefficient::active(idx, e.value));
        }
        if raw.omega.len() != raw.spec.groups() {
            return Err(D::Error::custom("one precision matrix per group required"));
        }
        let omega = raw
            .omega
            .iter()
            .map(|rows| {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(D::Error::custom("precision matrix has the wrong shape"));
                }
                Ok(DMatrix::from_fn(p, p, |r, c| rows[r][c]))
            })
            .collect::<std::result::Result<_, _>>()?;
        debug_assert_eq!(theta.as_slice().len(), edge_count(p));
        Ok(GroundTruth {
            spec: raw.spec,
            theta,
            omega,
        })
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> f64 {
    matrix.clone().symmetric_eigenvalues().min()
}

/// Shifts the diagonal so the smallest eigenvalue is at least `target`.
pub fn condition_pd(matrix: &DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let low = min_eigenvalue(matrix);
    if low < target {
        matrix + DMatrix::identity(matrix.nrows(), matrix.ncols()) * (target - low)
    } else {
        matrix.clone()
    }
}

/// Draws `n[k]` independent rows from `N(0, Omega_k^{-1})` for each group.
pub fn sample_groups<R: Rng + ?Sized>(truth: &GroundTruth, n: &[usize], rng: &mut R) -> Result<Vec<DMatrix<f64>>> {
    if n.len() != truth.spec.groups() {
        return Err(BjnsError::invalid("need one sample size per group"));
    }
    truth
        .omega
        .iter()
        .zip(n)
        .map(|(omega, &rows)| sample_mvn_precision(omega, rows, rng))
        .collect()
}

/// Rows from `N(0, omega^{-1})`: with `omega = L L'`, `y = L'^{-1} z`.
pub fn sample_mvn_precision<R: Rng + ?Sized>(omega: &DMatrix<f64>, rows: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = omega.nrows();
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| BjnsError::invalid("precision matrix is not positive definite"))?;
    let upper = chol.l().transpose();
    let z = DMatrix::from_fn(p, rows, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = upper
        .solve_upper_triangular(&z)
        .ok_or_else(|| BjnsError::Numeric("singular Cholesky factor".into()))?;
    Ok(y.transpose())
}
