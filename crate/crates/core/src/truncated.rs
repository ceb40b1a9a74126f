//! Moments of a standard normal truncated to an interval.
//!
//! Given `Z ~ N(0, 1)` conditioned on `a < Z < b`, [`standard_truncated`]
//! returns the conditional mean, `1 − var` (the variance deficit), and the
//! log of `P(a < Z < b)`. Intervals lying entirely on one side of zero are
//! reflected to the upper side and evaluated through Mills ratios, so the
//! moments stay accurate long after the interval mass itself underflows.

use crate::special::{ln_normal_pdf, mills_ratio, normal_pdf, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mean: f64,
    /// `1 − var`, kept separately because it is the quantity `D2` needs and
    /// forming it from `var` loses digits when the truncation is mild.
    pub var_deficit: f64,
    pub ln_mass: f64,
}

impl TruncatedMoments {
    pub fn var(&self) -> f64 {
        1.0 - self.var_deficit
    }

    pub fn mass(&self) -> f64 {
        self.ln_mass.exp()
    }
}

/// Moments of `N(0,1)` restricted to `(a, b)`; either end may be infinite.
///
/// Requires `a < b`.
pub fn standard_truncated(a: f64, b: f64) -> TruncatedMoments {
    debug_assert!(a < b, "empty interval ({a}, {b})");
    if a >= 0.0 {
        upper_side(a, b)
    } else if b <= 0.0 {
        let m = upper_side(-b, -a);
        TruncatedMoments { mean: -m.mean, ..m }
    } else {
        straddling(a, b)
    }
}

/// `0 ≤ a < b ≤ ∞`.
fn upper_side(a: f64, b: f64) -> TruncatedMoments {
    let ma = mills_ratio(a);
    let (one_minus_r, den, t_num) = if b.is_infinite() {
        (1.0, ma, a)
    } else {
        let exponent = -0.5 * (b - a) * (b + a);
        let r = exponent.exp();
        (-exponent.exp_m1(), ma - mills_ratio(b) * r, a - b * r)
    };
    let mean = one_minus_r / den;
    let t = t_num / den;
    TruncatedMoments {
        mean,
        var_deficit: mean * mean - t,
        ln_mass: ln_normal_pdf(a) + den.ln(),
    }
}

/// `a < 0 < b`; the mass is at least of order `min(|a|, b)` so no
/// cancellation.
fn straddling(a: f64, b: f64) -> TruncatedMoments {
    let mass = 1.0 - normal_sf(b) - normal_sf(-a);
    let (pa, pb) = (normal_pdf(a), normal_pdf(b));
    let apa = if a.is_infinite() { 0.0 } else { a * pa };
    let bpb = if b.is_infinite() { 0.0 } else { b * pb };
    let mean = (pa - pb) / mass;
    let t = (apa - bpb) / mass;
    TruncatedMoments {
        mean,
        var_deficit: mean * mean - t,
        ln_mass: mass.ln(),
    }
}
