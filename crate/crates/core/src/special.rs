//! Gaussian special functions with tail-safe evaluation.
//!
//! Everything that touches a Gaussian tail goes through the scaled
//! complementary error function `erfcx(x) = exp(x²)·erfc(x)` so that ratios
//! of tail probabilities stay representable long after `erfc` underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1/sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `ln(sqrt(2π))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;

// Below this `exp(x²)·erfc(x)` is used directly; above it the continued
// fraction converges to full precision within 30 terms.
const ERFCX_CF_THRESHOLD: f64 = 4.0;

/// Standard normal density φ(x).
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Natural log of the standard normal density.
#[inline]
pub fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Density of N(0, var) at `t`.
#[inline]
pub fn gaussian_pdf(t: f64, var: f64) -> f64 {
    (-0.5 * t * t / var).exp() / (2.0 * PI * var).sqrt()
}

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Finite for every `x ≥ -26`; overflows to `+∞` below that, where
/// `erfc(x) → 2` and the scale factor explodes.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // erfcx(x) = 2·exp(x²) − erfcx(−x)
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < ERFCX_CF_THRESHOLD {
        return exp_square(x) * erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    // Continued fraction: erfcx(x) = (1/√π) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let terms = if x >= 8.0 {
        12
    } else if x >= 5.0 {
        20
    } else {
        30
    };
    let mut f = x;
    for k in (1..=terms).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    1.0 / (SQRT_PI * f)
}

/// `exp(x²)` with the rounding error of `x²` folded back in.
#[inline]
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * (1.0 + lo)
}

/// Upper tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF Φ(x).
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

/// Mills ratio `Q(x)/φ(x)`. Decreasing; behaves like `1/x` for large `x`.
#[inline]
pub fn mills_ratio(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    SQRT_FRAC_PI_2 * erfcx(x * FRAC_1_SQRT_2)
}

/// `ln Q(x)`, finite for all finite `x`.
pub fn ln_normal_sf(x: f64) -> f64 {
    if x < 0.0 {
        normal_sf(x).ln()
    } else {
        ln_normal_pdf(x) + mills_ratio(x).ln()
    }
}

/// Probability that a standard normal lands in `(a, b)`, as a natural log.
///
/// Evaluated on whichever side of zero keeps the CDF difference away from
/// catastrophic cancellation.
pub fn ln_interval_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if a >= 0.0 {
        ln_upper_interval(a, b)
    } else if b <= 0.0 {
        ln_upper_interval(-b, -a)
    } else {
        (1.0 - normal_sf(b) - normal_sf(-a)).ln()
    }
}

fn ln_upper_interval(a: f64, b: f64) -> f64 {
    // Q(a) − Q(b) = φ(a)·[M(a) − M(b)·exp(−(b²−a²)/2)]
    let tail = if b.is_infinite() {
        0.0
    } else {
        mills_ratio(b) * (-0.5 * (b - a) * (b + a)).exp()
    };
    ln_normal_pdf(a) + (mills_ratio(a) - tail).ln()
}
