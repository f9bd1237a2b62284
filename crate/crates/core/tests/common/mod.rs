#![allow(dead_code)]

use bjns::{compute_group_stats, DiagState, EdgeCoefficient, GroupStats, ModelSpec, ThetaState};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_stats(rng: &mut ChaCha8Rng, groups: usize, p: usize) -> GroupStats {
    let data: Vec<DMatrix<f64>> = (0..groups)
        .map(|_| {
            let n = rng.random_range(p + 2..3 * p + 6);
            DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.5..1.5))
        })
        .collect();
    compute_group_stats(&data, true).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, p: usize, spec: &ModelSpec, density: f64) -> ThetaState {
    let mut theta = ThetaState::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.random::<f64>() < density {
                let c = rng.random_range(0..spec.len());
                theta.set(i, j, EdgeCoefficient::active(c, nonzero(rng)));
            }
        }
    }
    theta
}

pub fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.random_range(0.1..1.0);
    if rng.random() {
        v
    } else {
        -v
    }
}

pub fn random_delta(rng: &mut ChaCha8Rng, groups: usize, p: usize) -> DiagState {
    DiagState::from_rows((0..groups).map(|_| (0..p).map(|_| rng.random_range(0.3..2.5)).collect()).collect()).unwrap()
}

/// A random spec: all singletons plus a random selection of larger subsets.
pub fn random_spec(rng: &mut ChaCha8Rng, groups: usize) -> ModelSpec {
    let extra: Vec<bjns::Component> = (1u64..1 << groups)
        .map(bjns::Component::from_mask)
        .filter(|c| c.len() > 1 && rng.random::<bool>())
        .collect();
    ModelSpec::singletons_with(groups, &extra).unwrap()
}
