//! N-level regular scalar quantizers.
//!
//! Cells are indexed from zero: cell `i` is `[b_{i-1}, b_i)` with
//! `b_{-1} = −∞` and `b_{N-1} = +∞`, so a sample sitting exactly on a
//! boundary belongs to the cell above it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truncated::standard_truncated;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerRepr", into = "QuantizerRepr")]
pub struct RegularScalarQuantizer {
    boundaries: Vec<f64>,
    levels: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct QuantizerRepr {
    boundaries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<f64>>,
}

impl TryFrom<QuantizerRepr> for RegularScalarQuantizer {
    type Error = Error;
    fn try_from(r: QuantizerRepr) -> Result<Self> {
        match r.levels {
            Some(levels) => Self::with_levels(r.boundaries, levels),
            None => Self::new(r.boundaries),
        }
    }
}

impl From<RegularScalarQuantizer> for QuantizerRepr {
    fn from(q: RegularScalarQuantizer) -> Self {
        Self {
            boundaries: q.boundaries,
            levels: q.levels,
        }
    }
}

fn validate_boundaries(b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidParameter(
            "a regular quantizer needs at least one boundary (N ≥ 2)".into(),
        ));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("boundaries must be finite".into()));
    }
    if let Some(w) = b.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "boundaries must be strictly increasing ({} ≥ {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl RegularScalarQuantizer {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        validate_boundaries(&boundaries)?;
        Ok(Self {
            boundaries,
            levels: None,
        })
    }

    pub fn with_levels(boundaries: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        validate_boundaries(&boundaries)?;
        if levels.len() != boundaries.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} levels given for {} cells",
                levels.len(),
                boundaries.len() + 1
            )));
        }
        let q = Self {
            boundaries,
            levels: None,
        };
        for (i, &c) in levels.iter().enumerate() {
            let (lo, hi) = q.cell_bounds(i)?;
            if !(c >= lo && c < hi) {
                return Err(Error::InvalidParameter(format!(
                    "level {c} does not lie in cell {i} [{lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            levels: Some(levels),
            ..q
        })
    }

    /// Returns a copy carrying the given representation levels.
    pub fn set_levels(&self, levels: Vec<f64>) -> Result<Self> {
        Self::with_levels(self.boundaries.clone(), levels)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn levels(&self) -> Option<&[f64]> {
        self.levels.as_deref()
    }

    pub fn num_levels(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Cell index of `s`; non-finite input is rejected.
    pub fn quantize(&self, s: f64) -> Result<usize> {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("cannot quantize {s}")));
        }
        Ok(self.cell_of(s))
    }

    /// Cell index of a finite `s` (binary search).
    #[inline]
    pub fn cell_of(&self, s: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= s)
    }

    /// `(b_{i-1}, b_i)` with infinite outer ends.
    pub fn cell_bounds(&self, i: usize) -> Result<(f64, f64)> {
        let n = self.num_levels();
        if i >= n {
            return Err(Error::IndexOutOfRange {
                index: i,
                levels: n,
            });
        }
        Ok(self.cell_bounds_unchecked(i))
    }

    #[inline]
    pub(crate) fn cell_bounds_unchecked(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.boundaries[i - 1]
        };
        let hi = self.boundaries.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Conditional means of each cell under `N(0, input_std²)`.
    pub fn centroids(&self, input_std: f64) -> Vec<f64> {
        (0..self.num_levels())
            .map(|i| {
                let (lo, hi) = self.cell_bounds_unchecked(i);
                input_std * standard_truncated(lo / input_std, hi / input_std).mean
            })
            .collect()
    }

    /// `E(s − ĉ(s))²` for `s ~ N(0, input_std²)`, using the stored levels or,
    /// when none are stored, the cell centroids.
    pub fn gaussian_mse(&self, input_std: f64) -> Result<f64> {
        if !(input_std > 0.0 && input_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "input standard deviation must be positive, got {input_std}"
            )));
        }
        Ok(match &self.levels {
            Some(levels) => mse_with_levels(&self.boundaries, levels, input_std),
            None => {
                let c = self.centroids(input_std);
                mse_with_levels(&self.boundaries, &c, input_std)
            }
        })
    }

    /// The "uniform" design: `n_levels` equally spaced output levels with
    /// midpoint boundaries, step chosen to minimize the Gaussian MSE.
    pub fn design_uniform(n_levels: usize, input_std: f64) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "uniform design needs N ≥ 2, got {n_levels}"
            )));
        }
        if !(input_std > 0.0 && input_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "input standard deviation must be positive, got {input_std}"
            )));
        }
        let step = optimal_uniform_step(n_levels) * input_std;
        let (boundaries, levels) = uniform_grid(n_levels, step);
        Self::with_levels(boundaries, levels)
    }
}

fn mse_with_levels(boundaries: &[f64], levels: &[f64], sd: f64) -> f64 {
    let n = levels.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 {
                f64::NEG_INFINITY
            } else {
                boundaries[i - 1] / sd
            };
            let hi = if i + 1 == n {
                f64::INFINITY
            } else {
                boundaries[i] / sd
            };
            let m = standard_truncated(lo, hi);
            let offset = m.mean - levels[i] / sd;
            m.mass() * (m.var() + offset * offset)
        })
        .sum::<f64>()
        * sd
        * sd
}

/// Boundaries and levels of an equally spaced N-level quantizer centered at 0.
pub fn uniform_grid(n_levels: usize, step: f64) -> (Vec<f64>, Vec<f64>) {
    let half = (n_levels as f64 - 1.0) / 2.0;
    let levels = (0..n_levels).map(|k| (k as f64 - half) * step).collect();
    let boundaries = (1..n_levels)
        .map(|k| (k as f64 - n_levels as f64 / 2.0) * step)
        .collect();
    (boundaries, levels)
}

/// MSE of the equally spaced quantizer with the given step for `N(0, 1)`.
pub fn uniform_step_mse(n_levels: usize, step: f64) -> f64 {
    let (b, c) = uniform_grid(n_levels, step);
    mse_with_levels(&b, &c, 1.0)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Step of the MSE-optimal equally spaced quantizer for unit variance.
///
/// A coarse scan brackets the minimum (growing the range if the minimum sits
/// on its edge), then golden-section search refines it.
fn optimal_uniform_step(n_levels: usize) -> f64 {
    let f = |d: f64| uniform_step_mse(n_levels, d);
    let mut upper = 12.0 / (n_levels as f64 - 1.0);
    const SCAN: usize = 64;
    let (lo, hi) = loop {
        let h = upper / SCAN as f64;
        let (k, _) = (1..=SCAN)
            .map(|k| (k, f(k as f64 * h)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty scan");
        if k < SCAN {
            break ((k - 1) as f64 * h, (k + 1) as f64 * h);
        }
        upper *= 2.0;
    };
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 * b {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}
