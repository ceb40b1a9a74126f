mod common;

use common::{close, posterior_oracle};
use proptest::prelude::*;
use quantcs::prior::GaussBernoulliPrior;

#[test]
fn sparse_sample_matches_law_of_large_numbers() {
    let p = GaussBernoulliPrior::new(0.1).unwrap();
    let x = p.sample_signal(1_000_000, 11);
    // Binomial sd of the nonzero fraction is 3e-4, so ±0.002 is a ~6.7σ band.
    let nonzero = x.iter().filter(|v| **v != 0.0).count() as f64 / x.len() as f64;
    assert!((nonzero - 0.1).abs() < 0.002, "nonzero fraction {nonzero}");
    // Fourth moment of the mixture is 3/ρ = 30, so the variance estimate has
    // sd ≈ √(29/1e6) ≈ 0.0054 and ±0.02 is ~3.7σ.
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
}

#[test]
fn dense_prior_has_no_zeros_and_unit_variance() {
    let p = GaussBernoulliPrior::new(1.0).unwrap();
    let x = p.sample_signal(200_000, 3);
    assert!(x.iter().all(|v| *v != 0.0));
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((var - 1.0).abs() < 0.02);
    assert_eq!(x, p.sample_signal(200_000, 3));
}

#[test]
fn reference_point_matches_quadrature() {
    let p = GaussBernoulliPrior::new(0.1).unwrap();
    let (mean, var) = posterior_oracle(0.1, 10.0, 1.0, 0.5);
    let got = p.posterior(1.0, 0.5).unwrap();
    assert!(close(got.mean, mean, 1e-8, 0.0), "{} vs {mean}", got.mean);
    assert!(close(got.var, var, 1e-8, 0.0), "{} vs {var}", got.var);
}

#[test]
fn wiener_limit_when_dense() {
    let p = GaussBernoulliPrior::new(1.0).unwrap();
    assert!((p.input_mean(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((p.input_var(3.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
}

#[test]
fn tiny_noise_collapses_variance() {
    let p = GaussBernoulliPrior::new(0.1).unwrap();
    assert!(p.input_var(1.0, 1e-8).unwrap() < 1e-4);
    assert!((p.input_mean(1.0, 1e-8).unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn rejects_non_positive_noise() {
    let p = GaussBernoulliPrior::new(0.1).unwrap();
    assert!(p.input_mean(1.0, 0.0).is_err());
    assert!(p.input_var(1.0, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_matches_quadrature(
        rho in 0.02f64..1.0,
        q in -6.0f64..6.0,
        ln_nu in -4.0f64..2.5,
    ) {
        let nu = ln_nu.exp();
        let p = GaussBernoulliPrior::new(rho).unwrap();
        let got = p.posterior(q, nu).unwrap();
        let (mean, var) = posterior_oracle(rho, 1.0 / rho, q, nu);
        prop_assert!(close(got.mean, mean, 1e-8, 1e-8), "mean {} vs {}", got.mean, mean);
        prop_assert!(close(got.var, var, 1e-8, 0.0), "var {} vs {}", got.var, var);
    }

    #[test]
    fn odd_mean_positive_bounded_variance(
        rho in 0.01f64..0.999,
        q in -30.0f64..30.0,
        ln_nu in -10.0f64..5.0,
    ) {
        let nu = ln_nu.exp();
        let p = GaussBernoulliPrior::new(rho).unwrap();
        let a = p.posterior(q, nu).unwrap();
        let b = p.posterior(-q, nu).unwrap();
        prop_assert_eq!(a.mean, -b.mean);
        prop_assert!(a.var > 0.0);
        prop_assert!(a.var <= 1.0 / rho + nu);
    }

    #[test]
    fn mean_derivative_is_scaled_variance(
        rho in 0.02f64..1.0,
        q in -5.0f64..5.0,
        ln_nu in -3.0f64..2.0,
    ) {
        let nu = ln_nu.exp();
        let p = GaussBernoulliPrior::new(rho).unwrap();
        let h = 1e-5 * nu.sqrt();
        let fd = (p.input_mean(q + h, nu).unwrap() - p.input_mean(q - h, nu).unwrap()) / (2.0 * h);
        let want = p.input_var(q, nu).unwrap() / nu;
        prop_assert!((fd - want).abs() <= 1e-5 * want.abs().max(1.0), "{fd} vs {want}");
    }
}
