//! Globally adaptive Gauss–Kronrod (7/15) integration.
//!
//! The integrands met in state evolution are smooth but carry narrow
//! features (quantizer boundaries seen through a small channel variance, the
//! sparsity threshold of the denoiser). Callers pass those locations as
//! breakpoints; the integrator then bisects whichever panel has the largest
//! Gauss/Kronrod disagreement until the requested tolerance is met.

use crate::error::{Error, Result};
use crate::special::normal_pdf;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Half-width of the standard-normal window used by [`gaussian_expectation`].
/// The mass outside `±13` is below `1e-38`.
pub const GAUSS_WINDOW: f64 = 13.0;

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-300,
            max_panels: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

impl Integrator {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[points[0], points[last]]`, starting from one panel
    /// per consecutive pair of `points`. `points` must be sorted; repeated
    /// entries are skipped.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Result<Integral> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "integration needs at least two points".into(),
            ));
        }
        let mut panels: Vec<Panel> = points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| kronrod(&f, w[0], w[1]))
            .collect();
        if panels.is_empty() {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
                panels: 0,
            });
        }
        loop {
            let value: f64 = panels.iter().map(|p| p.value).sum();
            let error: f64 = panels.iter().map(|p| p.error).sum();
            if !value.is_finite() {
                return Err(Error::QuadratureNonConvergence(format!(
                    "integrand produced a non-finite sum ({value})"
                )));
            }
            if error <= self.abs_tol.max(self.rel_tol * value.abs()) {
                return Ok(Integral {
                    value,
                    error,
                    panels: panels.len(),
                });
            }
            if panels.len() >= self.max_panels {
                return Err(Error::QuadratureNonConvergence(format!(
                    "{} panels, estimate {value:e}, error {error:e}",
                    panels.len()
                )));
            }
            let (worst, _) = panels
                .iter()
                .enumerate()
                .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
                .expect("nonempty");
            let p = panels.swap_remove(worst);
            let mid = 0.5 * (p.lo + p.hi);
            if mid <= p.lo || mid >= p.hi {
                // Panel can no longer be split in floating point; accept it.
                panels.push(Panel { error: 0.0, ..p });
                continue;
            }
            panels.push(kronrod(&f, p.lo, mid));
            panels.push(kronrod(&f, mid, p.hi));
        }
    }
}

/// `E[g(U)]` for `U ~ N(0, 1)`, integrating over `±GAUSS_WINDOW` with the
/// given interior breakpoints (values outside the window are ignored).
pub fn gaussian_expectation<F: Fn(f64) -> f64>(
    integrator: &Integrator,
    g: F,
    breakpoints: &[f64],
) -> Result<Integral> {
    let mut points: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|u| u.is_finite() && u.abs() < GAUSS_WINDOW)
        .collect();
    points.push(-GAUSS_WINDOW);
    points.push(GAUSS_WINDOW);
    points.sort_by(f64::total_cmp);
    points.dedup();
    integrator.integrate(|u| normal_pdf(u) * g(u), &points)
}
