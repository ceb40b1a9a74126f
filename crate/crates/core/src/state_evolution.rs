//! Scalar state evolution for relaxed BP with a quantized AWGN channel.
//!
//! The recursion is `ν̄_{t+1} = Ē_in(Ē_out(β·ν̄_t, σ²))` started from the prior
//! variance. Both averages are one-dimensional Gaussian integrals evaluated by
//! adaptive Gauss–Kronrod with breakpoints placed at the known features of
//! the integrand:
//!
//! * `Ē_in(ν)` averages the denoiser variance over `q = x + v`, a two-part
//!   Gaussian mixture. The denoiser switches between its "zero" and
//!   "nonzero" branches on the scale `√ν`, which is tiny compared with the
//!   spread of the nonzero component once the estimate is good.
//! * `Ē_out(ν, σ²) = 1 / E[D2(y, ẑ, ν + σ²)]` with `(z, ẑ)` jointly Gaussian.
//!   Writing `z = ẑ + w` with `w ~ N(0, ν)` independent of
//!   `ẑ ~ N(0, βτ − ν)` leaves an outer integral over `ẑ` of
//!   `Σ_y P(y | ẑ)·D2(y, ẑ, ν + σ²)`. That sum peaks within a few
//!   `√(ν + σ²)` of each quantizer boundary.

use serde::{Deserialize, Serialize};

use crate::error::{check_variance, Error, Result};
use crate::prior::GaussBernoulliPrior;
use crate::quadrature::{gaussian_expectation, Integrator, GAUSS_WINDOW};
use crate::quantizer::RegularScalarQuantizer;
use crate::truncated::standard_truncated;

/// Value returned by [`eout_bar`] when `E[D2]` underflows.
pub const EOUT_GUARD: f64 = 1e200;
const EXPECTED_D2_FLOOR: f64 = 1e-300;
/// Increase of `ν̄` between steps tolerated before a step counts as
/// non-monotone.
pub const MONOTONE_TOL: f64 = 1e-9;

const DENOISER_OFFSETS: [f64; 6] = [1.0, 2.0, 4.0, 7.0, 12.0, 25.0];
const BOUNDARY_OFFSETS: [f64; 7] = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeConfig {
    pub beta: f64,
    pub sigma2: f64,
    pub prior: GaussBernoulliPrior,
    pub quantizer: RegularScalarQuantizer,
    pub t_max: usize,
    pub fp_tol: f64,
}

impl SeConfig {
    pub fn new(
        beta: f64,
        sigma2: f64,
        prior: GaussBernoulliPrior,
        quantizer: RegularScalarQuantizer,
    ) -> Result<Self> {
        let c = Self {
            beta,
            sigma2,
            prior,
            quantizer,
            t_max: 100,
            fp_tol: 1e-8,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "measurement ratio must be positive, got {}",
                self.beta
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be nonnegative, got {}",
                self.sigma2
            )));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if self.fp_tol.is_nan() || self.fp_tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "fixed-point tolerance must be positive, got {}",
                self.fp_tol
            )));
        }
        Ok(())
    }

    pub fn with_quantizer(&self, quantizer: RegularScalarQuantizer) -> Self {
        Self {
            quantizer,
            ..self.clone()
        }
    }

    /// Standard deviation of the quantizer input `s = z + η` when every
    /// component of `x` has its prior variance.
    pub fn input_std(&self) -> f64 {
        (self.beta * self.prior.variance() + self.sigma2).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrace {
    /// `ν̄_0, ν̄_1, …`
    pub values: Vec<f64>,
    pub fixed_point: f64,
    pub converged: bool,
    /// Steps where `ν̄` rose by more than [`MONOTONE_TOL`] (relative).
    pub nonmonotone_steps: usize,
    /// Some `Ē_out` evaluation hit [`EOUT_GUARD`].
    pub saturated: bool,
}

impl SeTrace {
    /// CSV with columns `t,nu_bar,nu_bar_dB`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,nu_bar,nu_bar_dB\n");
        for (t, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{t},{v:.12e},{:.6}\n", to_db(*v)));
        }
        out
    }

    pub fn fixed_point_db(&self) -> f64 {
        to_db(self.fixed_point)
    }
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoutBar {
    pub value: f64,
    pub saturated: bool,
}

/// State-evolution evaluator with a fixed integration accuracy.
#[derive(Debug, Clone, Copy)]
pub struct StateEvolution {
    pub integrator: Integrator,
}

impl Default for StateEvolution {
    fn default() -> Self {
        Self {
            integrator: Integrator::with_rel_tol(1e-11),
        }
    }
}

impl StateEvolution {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            integrator: Integrator::with_rel_tol(rel_tol),
        }
    }

    /// `Ē_in(ν) = E_q[E_in(q, ν)]`, the MMSE of the scalar denoiser.
    pub fn ein_bar(&self, prior: &GaussBernoulliPrior, nu: f64) -> Result<f64> {
        check_variance(nu)?;
        let rho = prior.rho();
        let s2 = prior.nonzero_variance();
        let mut total = 0.0;
        let mut parts = vec![(rho, s2 + nu)];
        if rho < 1.0 {
            parts.push((1.0 - rho, nu));
        }
        for (weight, var) in parts {
            let sd = var.sqrt();
            let r = (nu / var).sqrt();
            let mut bp = vec![0.0];
            for k in DENOISER_OFFSETS {
                bp.push(k * r);
                bp.push(-k * r);
            }
            let e = gaussian_expectation(
                &self.integrator,
                |u| prior.posterior_unchecked(sd * u, nu).var,
                &bp,
            )?;
            total += weight * e.value;
        }
        Ok(total)
    }

    /// `Ē_out(ν, σ²)`; requires `0 < ν ≤ β·τ_init`.
    pub fn eout_bar(&self, config: &SeConfig, nu: f64) -> Result<EoutBar> {
        let cap = config.beta * config.prior.variance();
        if !(nu > 0.0 && nu <= cap * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                value: nu,
                domain: format!("(0, {cap}]"),
            });
        }
        let zhat_var = (cap - nu).max(0.0);
        let total = nu + config.sigma2;
        let expected_d2 = if zhat_var <= 0.0 {
            cell_information(&config.quantizer, 0.0, total)
        } else {
            let sd_z = zhat_var.sqrt();
            let sd_t = total.sqrt();
            let mut bp =
                Vec::with_capacity(config.quantizer.boundaries().len() * BOUNDARY_OFFSETS.len());
            for &b in config.quantizer.boundaries() {
                for k in BOUNDARY_OFFSETS {
                    let u = (b + k * sd_t) / sd_z;
                    if u.abs() < GAUSS_WINDOW {
                        bp.push(u);
                    }
                }
            }
            gaussian_expectation(
                &self.integrator,
                |u| cell_information(&config.quantizer, sd_z * u, total),
                &bp,
            )?
            .value
        };
        if expected_d2 < EXPECTED_D2_FLOOR {
            return Ok(EoutBar {
                value: EOUT_GUARD,
                saturated: true,
            });
        }
        Ok(EoutBar {
            value: 1.0 / expected_d2,
            saturated: false,
        })
    }

    /// Runs the recursion from `ν̄_0 = τ_init`.
    pub fn recursion(&self, config: &SeConfig) -> Result<SeTrace> {
        self.recursion_from(config, config.prior.variance())
    }

    /// Runs the recursion from an arbitrary starting value.
    pub fn recursion_from(&self, config: &SeConfig, start: f64) -> Result<SeTrace> {
        config.validate()?;
        let tau = config.prior.variance();
        if !(start > 0.0 && start <= tau * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                value: start,
                domain: format!("(0, {tau}]"),
            });
        }
        let mut values = vec![start];
        let mut current = start;
        let mut converged = false;
        let mut nonmonotone_steps = 0;
        let mut saturated = false;
        for _ in 0..config.t_max {
            let nu = (config.beta * current).min(config.beta * tau);
            let eout = self.eout_bar(config, nu)?;
            saturated |= eout.saturated;
            let next = self.ein_bar(&config.prior, eout.value)?.min(tau);
            values.push(next);
            if next > current * (1.0 + MONOTONE_TOL) {
                nonmonotone_steps += 1;
            }
            let step = (next - current).abs();
            current = next;
            if step < config.fp_tol * current {
                converged = true;
                break;
            }
        }
        Ok(SeTrace {
            values,
            fixed_point: current,
            converged,
            nonmonotone_steps,
            saturated,
        })
    }
}

/// `Σ_y P(y | ẑ)·D2(y, ẑ, ν)` for `s | ẑ ~ N(ẑ, ν)`.
///
/// Walks outward from the cell containing `ẑ` and stops once cell masses
/// underflow; the mass falls monotonically away from that cell.
pub fn cell_information(q: &RegularScalarQuantizer, zhat: f64, nu: f64) -> f64 {
    let sd = nu.sqrt();
    let n = q.num_levels();
    let center = q.cell_of(zhat);
    let term = |i: usize| -> Option<f64> {
        let (lo, hi) = q.cell_bounds_unchecked(i);
        let m = standard_truncated((lo - zhat) / sd, (hi - zhat) / sd);
        if m.ln_mass < -745.0 {
            None
        } else {
            Some(m.mass() * m.var_deficit.clamp(0.0, 1.0))
        }
    };
    let mut acc = term(center).unwrap_or(0.0);
    for i in (0..center).rev() {
        match term(i) {
            Some(v) => acc += v,
            None => break,
        }
    }
    for i in center + 1..n {
        match term(i) {
            Some(v) => acc += v,
            None => break,
        }
    }
    acc / nu
}

/// `Ē_in(ν)` with the default evaluator.
pub fn ein_bar(prior: &GaussBernoulliPrior, nu: f64) -> Result<f64> {
    StateEvolution::default().ein_bar(prior, nu)
}

/// `Ē_out(ν, σ²)` with the default evaluator.
pub fn eout_bar(config: &SeConfig, nu: f64) -> Result<EoutBar> {
    StateEvolution::default().eout_bar(config, nu)
}

/// The state-evolution recursion with the default evaluator.
pub fn se_recursion(config: &SeConfig) -> Result<SeTrace> {
    StateEvolution::default().recursion(config)
}
