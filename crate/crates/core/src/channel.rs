//! Quantized AWGN measurement channel.
//!
//! `s = z + η` with `η ~ N(0, σ²)`, then `y = Q(s)`. The output functions
//! take the *total* variance `ν` of the Gaussian belief about `s` (callers add
//! `σ²` themselves) and return moments of `N(ẑ, ν)` truncated to the cell of
//! `y`, along with the derived scores `D1 = (ẑ − F_out)/ν` and
//! `D2 = (1 − E_out/ν)/ν`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_variance, Error, Result};
use crate::quantizer::RegularScalarQuantizer;
use crate::special::ln_interval_mass;
use crate::truncated::standard_truncated;

/// Cell probabilities below this are treated as saturated.
pub const SATURATION_MASS: f64 = 1e-300;
/// Relative floor applied to `E_out` (as a fraction of `ν`).
pub const OUTPUT_VAR_FLOOR: f64 = 1e-12;

fn ln_saturation() -> f64 {
    SATURATION_MASS.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedAwgnChannel {
    pub quantizer: RegularScalarQuantizer,
    pub sigma2: f64,
}

/// Truncated-Gaussian moments `F_out`, `E_out` for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMoments {
    pub mean: f64,
    pub var: f64,
    /// The cell probability underflowed; `mean` was clamped to the nearest
    /// finite endpoint and `var` to its floor.
    pub saturated: bool,
}

/// `D1` and `D2` for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub d1: f64,
    pub d2: f64,
    pub saturated: bool,
}

impl QuantizedAwgnChannel {
    pub fn new(quantizer: RegularScalarQuantizer, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be nonnegative, got {sigma2}"
            )));
        }
        Ok(Self { quantizer, sigma2 })
    }

    pub fn num_levels(&self) -> usize {
        self.quantizer.num_levels()
    }

    pub fn measure(&self, z: &[f64], seed: u64) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.measure_with(z, &mut rng)
    }

    pub fn measure_with<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<Vec<usize>> {
        let sd = self.sigma2.sqrt();
        z.iter()
            .map(|&za| {
                let eta: f64 = rng.sample(StandardNormal);
                self.quantizer.quantize(za + sd * eta)
            })
            .collect()
    }

    fn check_index(&self, y: usize) -> Result<()> {
        if y >= self.num_levels() {
            Err(Error::IndexOutOfRange {
                index: y,
                levels: self.num_levels(),
            })
        } else {
            Ok(())
        }
    }

    /// `p(y | z) = P(z + η ∈ cell(y))`.
    pub fn likelihood(&self, y: usize, z: f64) -> Result<f64> {
        self.check_index(y)?;
        if self.sigma2 <= 0.0 {
            return Err(Error::InvalidParameter(
                "likelihood is undefined for a noiseless channel".into(),
            ));
        }
        let sd = self.sigma2.sqrt();
        let (lo, hi) = self.quantizer.cell_bounds_unchecked(y);
        Ok(ln_interval_mass((lo - z) / sd, (hi - z) / sd).exp())
    }

    /// Moments of `N(zhat, nu)` restricted to `cell(y)`.
    pub fn output_moments(&self, y: usize, zhat: f64, nu: f64) -> Result<OutputMoments> {
        self.check_index(y)?;
        check_variance(nu)?;
        if !zhat.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite mean {zhat}")));
        }
        Ok(self.moments_unchecked(y, zhat, nu))
    }

    pub(crate) fn moments_unchecked(&self, y: usize, zhat: f64, nu: f64) -> OutputMoments {
        let (lo, hi) = self.quantizer.cell_bounds_unchecked(y);
        let sd = nu.sqrt();
        let m = standard_truncated((lo - zhat) / sd, (hi - zhat) / sd);
        if m.ln_mass < ln_saturation() || !m.mean.is_finite() {
            return OutputMoments {
                mean: nearest_endpoint(lo, hi, zhat),
                var: OUTPUT_VAR_FLOOR * nu,
                saturated: true,
            };
        }
        OutputMoments {
            mean: (zhat + sd * m.mean).clamp(lo, hi),
            var: nu * m.var().clamp(OUTPUT_VAR_FLOOR, 1.0),
            saturated: false,
        }
    }

    /// `F_out(y, ẑ, ν)`.
    pub fn output_mean(&self, y: usize, zhat: f64, nu: f64) -> Result<f64> {
        self.output_moments(y, zhat, nu).map(|m| m.mean)
    }

    /// `E_out(y, ẑ, ν)`.
    pub fn output_var(&self, y: usize, zhat: f64, nu: f64) -> Result<f64> {
        self.output_moments(y, zhat, nu).map(|m| m.var)
    }

    pub fn scores(&self, y: usize, zhat: f64, nu: f64) -> Result<Scores> {
        self.check_index(y)?;
        check_variance(nu)?;
        if !zhat.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite mean {zhat}")));
        }
        Ok(self.scores_unchecked(y, zhat, nu))
    }

    /// `D1`, `D2` without argument checks. Computed from the standardized
    /// moments directly rather than by differencing `F_out` and `ẑ`.
    #[inline]
    pub fn scores_unchecked(&self, y: usize, zhat: f64, nu: f64) -> Scores {
        let (lo, hi) = self.quantizer.cell_bounds_unchecked(y);
        let sd = nu.sqrt();
        let m = standard_truncated((lo - zhat) / sd, (hi - zhat) / sd);
        if m.ln_mass < ln_saturation() || !m.mean.is_finite() {
            return Scores {
                d1: (zhat - nearest_endpoint(lo, hi, zhat)) / nu,
                d2: (1.0 - OUTPUT_VAR_FLOOR) / nu,
                saturated: true,
            };
        }
        Scores {
            d1: -m.mean / sd,
            d2: m.var_deficit.clamp(0.0, 1.0 - OUTPUT_VAR_FLOOR) / nu,
            saturated: false,
        }
    }

    /// `D1(y, ẑ, ν) = (ẑ − F_out)/ν`.
    pub fn d1(&self, y: usize, zhat: f64, nu: f64) -> Result<f64> {
        self.scores(y, zhat, nu).map(|s| s.d1)
    }

    /// `D2(y, ẑ, ν) = (1 − E_out/ν)/ν`.
    pub fn d2(&self, y: usize, zhat: f64, nu: f64) -> Result<f64> {
        self.scores(y, zhat, nu).map(|s| s.d2)
    }
}

fn nearest_endpoint(lo: f64, hi: f64, zhat: f64) -> f64 {
    if zhat <= lo {
        lo
    } else if zhat >= hi {
        hi
    } else if (zhat - lo) < (hi - zhat) {
        lo
    } else {
        hi
    }
}
