//! Gauss-Bernoulli signal prior and its scalar posterior denoiser.
//!
//! A component is `0` with probability `1 − ρ` and `N(0, s²)` otherwise, with
//! `s² = 1/ρ` by default so the prior variance is one. Observing it through
//! `q = x + v`, `v ~ N(0, ν)`, gives a two-component posterior: the point
//! mass at zero and a Gaussian with mean `q·s²/(s²+ν)` and variance
//! `s²ν/(s²+ν)`. The mixing weight is computed from log-likelihoods so large
//! `|q|` never overflows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_variance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussBernoulliPrior {
    rho: f64,
    nonzero_variance: f64,
}

/// Posterior mean and variance of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
}

impl GaussBernoulliPrior {
    /// Prior with sparsity `rho` and nonzero variance `1/rho`.
    pub fn new(rho: f64) -> Result<Self> {
        Self::with_nonzero_variance(rho, 1.0 / rho)
    }

    pub fn with_nonzero_variance(rho: f64, nonzero_variance: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsity ratio must lie in (0, 1], got {rho}"
            )));
        }
        if !(nonzero_variance > 0.0 && nonzero_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nonzero-component variance must be positive, got {nonzero_variance}"
            )));
        }
        Ok(Self {
            rho,
            nonzero_variance,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nonzero_variance(&self) -> f64 {
        self.nonzero_variance
    }

    /// Prior mean (always zero).
    pub fn mean(&self) -> f64 {
        0.0
    }

    /// Prior variance `τ_init = ρ·s²`.
    pub fn variance(&self) -> f64 {
        self.rho * self.nonzero_variance
    }

    pub fn sample_signal(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let sd = self.nonzero_variance.sqrt();
        (0..n)
            .map(|_| {
                let active = rng.random::<f64>() < self.rho;
                let g: f64 = rng.sample(StandardNormal);
                if active {
                    sd * g
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Posterior probability that the component is nonzero given `q`.
    fn active_probability(&self, q: f64, nu: f64) -> f64 {
        if self.rho >= 1.0 {
            return 1.0;
        }
        let wide = self.nonzero_variance + nu;
        let ln_active = self.rho.ln() - 0.5 * wide.ln() - 0.5 * q * q / wide;
        let ln_zero = (-self.rho).ln_1p() - 0.5 * nu.ln() - 0.5 * q * q / nu;
        // logistic(ln_active − ln_zero) without overflow
        let d = ln_active - ln_zero;
        if d >= 0.0 {
            1.0 / (1.0 + (-d).exp())
        } else {
            let e = d.exp();
            e / (1.0 + e)
        }
    }

    /// Posterior mean and variance of `x` given `x + v = q`, `v ~ N(0, nu)`.
    ///
    /// Unchecked variant of [`Self::posterior`] for inner loops; `nu` must be
    /// positive.
    #[inline]
    pub fn posterior_unchecked(&self, q: f64, nu: f64) -> Posterior {
        let s2 = self.nonzero_variance;
        let pi = self.active_probability(q, nu);
        let shrink = s2 / (s2 + nu);
        let m1 = q * shrink;
        let v1 = nu * shrink;
        Posterior {
            mean: pi * m1,
            var: pi * v1 + pi * (1.0 - pi) * m1 * m1,
        }
    }

    pub fn posterior(&self, q: f64, nu: f64) -> Result<Posterior> {
        check_variance(nu)?;
        if !q.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite observation {q}")));
        }
        Ok(self.posterior_unchecked(q, nu))
    }

    /// `F_in(q, ν) = E{x | x + v = q}`.
    pub fn input_mean(&self, q: f64, nu: f64) -> Result<f64> {
        self.posterior(q, nu).map(|p| p.mean)
    }

    /// `E_in(q, ν) = var{x | x + v = q}`.
    pub fn input_var(&self, q: f64, nu: f64) -> Result<f64> {
        self.posterior(q, nu).map(|p| p.var)
    }
}
