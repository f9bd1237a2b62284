//! Randomized invariants across the core modules.

mod common;

use bjns::gibbs::{
    category_probabilities, category_probabilities_direct, run_chain_observed, ChainConfig, DiagSampler, MixtureParams,
    PriorConfig, PriorOddsMode, ShrinkageHyper,
};
use bjns::inference::{kappa, majority_vote, SelectionTrace};
use bjns::model::{assemble_omega, edges, enumerate_full_components};
use bjns::oracle::{direct_trace_form, materialize_oracle};
use bjns::screening::{prune_components, PruneRule, ScreenEntry, ScreenReport, Stage};
use bjns::synthetic::{gen_block_k6, gen_random_shared, score, Target};
use bjns::{Component, EdgeCoefficient, ModelSpec, QuadFormCache, ThetaState};
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assemble_is_linear_in_one_coefficient(seed: u64, groups in 1usize..5, p in 2usize..7) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r, groups);
        let mut theta = random_theta(&mut r, p, &spec, 0.5);
        let delta = random_delta(&mut r, groups, p);
        let before: Vec<DMatrix<f64>> = (0..groups).map(|k| assemble_omega(&theta, &delta, &spec, k).unwrap()).collect();
        let i = r.random_range(0..p - 1);
        let j = r.random_range(i + 1..p);
        let comp = r.random_range(0..spec.len());
        let v = nonzero(&mut r);
        theta.set(i, j, EdgeCoefficient::active(comp, v));
        for k in 0..groups {
            let after = assemble_omega(&theta, &delta, &spec, k).unwrap();
            let mut expected = before[k].clone();
            let w = if spec.component(comp).contains(k) { v } else { 0.0 };
            expected[(i, j)] = w;
            expected[(j, i)] = w;
            prop_assert_eq!(after, expected);
        }
    }

    #[test]
    fn full_family_has_every_subset_once(groups in 1usize..9) {
        let comps = enumerate_full_components(groups).unwrap();
        prop_assert_eq!(comps.len(), (1 << groups) - 1);
        for k in 0..groups {
            prop_assert_eq!(comps.iter().filter(|c| **c == Component::singleton(k)).count(), 1);
        }
        let spec = ModelSpec::full(groups).unwrap();
        prop_assert!(spec.validate().is_ok());
    }

    #[test]
    fn cache_tracks_random_updates(seed: u64, groups in 1usize..4, p in 2usize..8) {
        let mut r = rng(seed);
        let stats = random_stats(&mut r, groups, p);
        let spec = random_spec(&mut r, groups);
        let mut theta = random_theta(&mut r, p, &spec, 0.3);
        let mut delta = random_delta(&mut r, groups, p);
        let mut cache = QuadFormCache::new(&stats, &spec, &theta, &delta).unwrap();
        for _ in 0..300 {
            if r.random::<f64>() < 0.7 {
                let i = r.random_range(0..p - 1);
                let j = r.random_range(i + 1..p);
                let new = if r.random::<f64>() < 0.3 {
                    EdgeCoefficient::ABSENT
                } else {
                    EdgeCoefficient::active(r.random_range(0..spec.len()), nonzero(&mut r))
                };
                cache.apply_theta_update(&mut theta, i, j, new).unwrap();
            } else {
                let k = r.random_range(0..groups);
                let i = r.random_range(0..p);
                cache.apply_diag_update(&mut delta, k, i, r.random_range(0.2..3.0)).unwrap();
            }
        }
        prop_assert!(cache.check(&theta, &delta).is_ok());
        prop_assert!(cache.drift(&theta, &delta).unwrap() < 1e-8);
    }

    #[test]
    fn quadratic_form_identity(seed: u64, groups in 1usize..4, p in 2usize..7) {
        let mut r = rng(seed);
        let stats = random_stats(&mut r, groups, p);
        let spec = random_spec(&mut r, groups);
        let theta = random_theta(&mut r, p, &spec, 0.6);
        let delta = random_delta(&mut r, groups, p);
        let dense = materialize_oracle(&stats, &spec).unwrap();
        let direct = direct_trace_form(&stats, &spec, &theta, &delta, &vec![1.0; groups]).unwrap();
        let structured = dense.quad_form(&theta, &delta);
        prop_assert!((direct - structured).abs() <= 1e-10 * direct.abs().max(1e-300), "{} vs {}", direct, structured);
    }

    #[test]
    fn block_spectrum_within_twice_covariance_spectrum(seed: u64, p in 2usize..9) {
        let mut r = rng(seed);
        let stats = random_stats(&mut r, 1, p);
        let s = stats.cov(0);
        let b = bjns::oracle::offdiag_block(s);
        let es = s.clone().symmetric_eigenvalues();
        let eb = b.symmetric_eigenvalues();
        // each off-diagonal entry enters the vectorized matrix twice, so the
        // bounds carry a factor of two
        let tol = 1e-8 * es.max().max(1.0);
        prop_assert!(es.min() <= eb.min() + tol);
        prop_assert!(2.0 * es.min() <= eb.min() + tol);
        prop_assert!(eb.max() <= 2.0 * es.max() + tol);
    }

    #[test]
    fn log_space_probabilities_match_direct(
        prec in proptest::collection::vec(0.5f64..50.0, 1..6),
        seed: u64,
        density in 0usize..20,
        corrected: bool,
    ) {
        let mut r = rng(seed);
        let shift: Vec<f64> = prec.iter().map(|_| r.random_range(-8.0..8.0)).collect();
        let params = MixtureParams::from_moments(&prec, &shift).unwrap();
        let prior = PriorConfig {
            q1: 0.2,
            q2: 0.04,
            tau: 7.0,
            mode: if corrected { PriorOddsMode::Corrected } else { PriorOddsMode::Literal },
        };
        let a = category_probabilities(&params, &prior, density);
        let b = category_probabilities_direct(&params, &prior, density);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn vote_ignores_record_order(seed: u64, p in 2usize..6, groups in 1usize..4, sweeps in 1usize..40) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r, groups);
        let l = spec.len();
        let states: Vec<ThetaState> = (0..sweeps).map(|_| random_theta(&mut r, p, &spec, 0.5)).collect();
        let delta = random_delta(&mut r, groups, p);
        let mut forward = SelectionTrace::new(p, l, groups, sweeps);
        let mut backward = SelectionTrace::new(p, l, groups, sweeps);
        let mut order: Vec<usize> = (0..sweeps).collect();
        for s in &states {
            forward.record(s, &delta);
        }
        order.shuffle(&mut r);
        for &idx in &order {
            backward.record(&states[idx], &delta);
        }
        let a = majority_vote(&forward, &spec).unwrap();
        let b = majority_vote(&backward, &spec).unwrap();
        prop_assert_eq!(a.selection(), b.selection());
        for (x, y) in a.edges.iter().zip(&b.edges) {
            prop_assert_eq!(x.freq, y.freq);
            prop_assert!((x.est - y.est).abs() < 1e-12);
            prop_assert!(x.freq >= 1.0 / (l as f64 + 1.0));
            prop_assert_eq!(x.est == 0.0, x.component.is_none());
        }
    }

    #[test]
    fn vote_frequency_floor_with_many_components(seed: u64, groups in 1usize..4, p in 2usize..6, sweeps in 1usize..30) {
        let mut r = rng(seed);
        let spec = ModelSpec::full(groups).unwrap();
        let delta = random_delta(&mut r, groups, p);
        let mut trace = SelectionTrace::new(p, spec.len(), groups, sweeps);
        for _ in 0..sweeps {
            trace.record(&random_theta(&mut r, p, &spec, 0.8), &delta);
        }
        let fit = majority_vote(&trace, &spec).unwrap();
        for rec in &fit.edges {
            prop_assert!(rec.freq >= 1.0 / (spec.len() as f64 + 1.0));
        }
        prop_assert!(fit.validate().is_ok());
    }

    #[test]
    fn kappa_is_a_fraction(seed: u64, groups in 1usize..4, p in 2usize..8) {
        let mut r = rng(seed);
        let spec = ModelSpec::full(groups).unwrap();
        let a = bjns::inference::state_selection(&random_theta(&mut r, p, &spec, 0.5), &spec);
        let b = bjns::inference::state_selection(&random_theta(&mut r, p, &spec, 0.5), &spec);
        let k = kappa(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert_eq!(kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn score_is_invariant_to_variable_relabeling(seed: u64, groups in 1usize..4, p in 2usize..8) {
        let mut r = rng(seed);
        let spec = ModelSpec::full(groups).unwrap();
        let sel = random_theta(&mut r, p, &spec, 0.4);
        let truth = random_theta(&mut r, p, &spec, 0.4);
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut r);
        let relabel = |theta: &ThetaState| {
            let mut out = ThetaState::empty(p);
            for (i, j) in edges(p) {
                let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                out.set(a, b, theta.get(i, j));
            }
            out
        };
        let as_sel = |t: &ThetaState| bjns::inference::state_selection(t, &spec);
        let targets = (0..groups).map(Target::Group).chain(spec.components().iter().map(|&c| Target::Component(c)));
        for t in targets {
            let before = score(&as_sel(&sel), &as_sel(&truth), t).unwrap();
            let after = score(&as_sel(&relabel(&sel)), &as_sel(&relabel(&truth)), t).unwrap();
            prop_assert_eq!(before, after);
            prop_assert!((0.0..=1.0).contains(&before.sp) && (0.0..=1.0).contains(&before.se));
            prop_assert!((-1.0..=1.0).contains(&before.mcc));
        }
    }

    #[test]
    fn pruning_closes_over_inactive_pairs(groups in 3usize..8, counts in proptest::collection::vec(0usize..60, 28)) {
        let pairs: Vec<(usize, usize)> = (1..=groups).flat_map(|a| (a + 1..=groups).map(move |b| (a, b))).collect();
        let mut report = ScreenReport {
            entries: pairs
                .iter()
                .zip(&counts)
                .map(|(&(a, b), &n)| ScreenEntry { component: vec![a, b], edge_count: n, active: true, stage: Stage::Pairwise })
                .collect(),
        };
        let spec = prune_components(&mut report, PruneRule::default(), groups).unwrap();
        prop_assert!(spec.validate().is_ok());
        for k in 0..groups {
            prop_assert!(spec.index_of(Component::singleton(k)).is_some());
        }
        let dead = report.inactive_pairs();
        for c in spec.components() {
            prop_assert!(!dead.iter().any(|d| d.is_subset_of(*c)));
        }
        for e in report.stage(Stage::Pairwise).filter(|e| e.active) {
            prop_assert!(spec.index_of(e.component()).is_some());
        }
    }

    #[test]
    fn generators_are_deterministic_and_identifiable(seed: u64) {
        let a = gen_random_shared(16, 0.9, 0.5, 3, &mut rng(seed)).unwrap();
        let b = gen_random_shared(16, 0.9, 0.5, 3, &mut rng(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        for c in a.theta().as_slice() {
            prop_assert_eq!(c.is_present(), c.value != 0.0);
        }
        let c = gen_block_k6(12, &mut rng(seed)).unwrap();
        prop_assert_eq!(&c, &gen_block_k6(12, &mut rng(seed)).unwrap());
        for k in 0..6 {
            prop_assert!(bjns::synthetic::min_eigenvalue(c.omega(k)) >= bjns::synthetic::PD_TARGET - 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chain_states_stay_identifiable_and_positive(seed: u64, groups in 1usize..4, p in 2usize..6, grid: bool) {
        let mut r = rng(seed);
        let stats = random_stats(&mut r, groups, p);
        let spec = ModelSpec::full(groups).unwrap();
        let cfg = ChainConfig {
            burnin: 20,
            samples: 30,
            seed,
            diag_sampler: if grid { DiagSampler::Grid } else { DiagSampler::PointMass },
            ..ChainConfig::default()
        };
        let prior = PriorConfig::defaults_for(p, stats.mean_n(), PriorOddsMode::Literal);
        let mut bad = 0usize;
        run_chain_observed(&stats, &spec, &cfg, &ShrinkageHyper::default(), &prior, None, &mut |_, state| {
            for c in state.theta.as_slice() {
                let ok = match c.component {
                    Some(l) => l < spec.len() && c.value != 0.0 && c.value.is_finite(),
                    None => c.value == 0.0,
                };
                if !ok {
                    bad += 1;
                }
            }
            for k in 0..groups {
                bad += state.delta.group(k).iter().filter(|v| !(**v > 0.0) || !v.is_finite()).count();
            }
            Ok(())
        })
        .unwrap();
        prop_assert_eq!(bad, 0);
    }
}
