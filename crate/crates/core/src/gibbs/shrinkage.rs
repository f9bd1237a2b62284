//! Conjugate Gamma refreshes of the shrinkage parameters (shape-rate form).

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::ShrinkageHyper;

fn gamma_shape_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    // rand_distr parameterizes by scale
    let draw = Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng);
    // a shape below one can round to zero in double precision
    draw.max(f64::MIN_POSITIVE)
}

/// `lambda ~ Gamma(r + 1/2, theta^2 / 2 + s)`.
pub fn draw_lambda<R: Rng + ?Sized>(theta_value: f64, hyper: &ShrinkageHyper, rng: &mut R) -> f64 {
    gamma_shape_rate(hyper.r + 0.5, 0.5 * theta_value * theta_value + hyper.s, rng)
}

/// `gamma ~ Gamma(r + 1, |delta| + s)`.
pub fn draw_gamma_diag<R: Rng + ?Sized>(delta_value: f64, hyper: &ShrinkageHyper, rng: &mut R) -> f64 {
    gamma_shape_rate(hyper.r + 1.0, delta_value.abs() + hyper.s, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_of(n: usize, mut f: impl FnMut() -> f64) -> f64 {
        (0..n).map(|_| f()).sum::<f64>() / n as f64
    }

    #[test]
    fn lambda_mean_matches_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hyper = ShrinkageHyper { r: 0.5, s: 1.0 };
        let theta = 2f64.sqrt();
        let m = mean_of(100_000, || draw_lambda(theta, &hyper, &mut rng));
        assert!((m - 0.5).abs() / 0.5 < 0.02, "mean {m}");

        let hyper = ShrinkageHyper { r: 2.0, s: 0.3 };
        let expected = 2.5 / (0.5 * 0.49 + 0.3);
        let m = mean_of(100_000, || draw_lambda(0.7, &hyper, &mut rng));
        assert!((m - expected).abs() / expected < 0.02);
    }

    #[test]
    fn lambda_with_defaults_at_zero_is_huge_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hyper = ShrinkageHyper::default();
        let draws: Vec<f64> = (0..100_000).map(|_| draw_lambda(0.0, &hyper, &mut rng)).collect();
        assert!(draws.iter().all(|&v| v > 0.0));
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 5.1e5).abs() / 5.1e5 < 0.05, "mean {m}");
    }

    #[test]
    fn gamma_diag_mean_matches_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // s = 0 is outside the validated range but exercises the plain Gamma(2, 1) law
        let hyper = ShrinkageHyper { r: 1.0, s: 0.0 };
        let m = mean_of(100_000, || draw_gamma_diag(1.0, &hyper, &mut rng));
        assert!((m - 2.0).abs() / 2.0 < 0.02);
        let hyper = ShrinkageHyper::default();
        let m = mean_of(100_000, || draw_gamma_diag(-0.8, &hyper, &mut rng));
        let expected = 1.01 / (0.8 + 1e-6);
        assert!((m - expected).abs() / expected < 0.02);
    }
}
