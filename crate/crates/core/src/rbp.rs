//! Relaxed belief propagation on a dense measurement matrix.
//!
//! Every edge `(a, i)` of the bipartite graph carries a mean/variance pair in
//! each direction: `x̂_{i→a}, τ̂_{i→a}` from variables to measurements and
//! `u_{a→i}, τ_{a→i}` back. Leave-one-out sums are formed by computing the
//! full sum once per node and subtracting the excluded edge, which keeps an
//! iteration at `O(mn)`.
//!
//! Matrices are column-major with shape `m × n`, so column `i` holds every
//! edge of variable `i`; both half-iterations run column-parallel.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::QuantizedAwgnChannel;
use crate::error::{Error, Result};
use crate::prior::GaussBernoulliPrior;

/// Floor on message variances and on leave-one-out precision sums.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Relative slack above the prior variance allowed for `τ̂`.
pub const VARIANCE_CEILING_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    matrix: DMatrix<f64>,
}

impl MeasurementEnsemble {
    /// I.i.d. `N(0, 1/m)` entries, deterministic per seed.
    pub fn generate(m: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate_with(m, n, &mut rng)
    }

    pub fn generate_with<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {m}×{n}"
            )));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let data: Vec<f64> = (0..m * n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            matrix: DMatrix::from_vec(m, n, data),
        })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter("empty measurement matrix".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "measurement matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// Measurement ratio `n/m`.
    pub fn beta(&self) -> f64 {
        self.n() as f64 / self.m() as f64
    }

    /// `z = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut z = vec![0.0; m];
        for (col, &xi) in self.matrix.as_slice().chunks_exact(m).zip(x) {
            for (za, &aai) in z.iter_mut().zip(col) {
                *za += aai * xi;
            }
        }
        z
    }
}

/// Counters for numerical guards hit during message passing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbpDiagnostics {
    /// Leave-one-out variance sums or `τ̂` values raised to [`VARIANCE_FLOOR`].
    pub floor_hits: u64,
    /// `τ̂` values clipped to the prior-variance ceiling.
    pub ceiling_hits: u64,
    /// Measurement updates that fell into the saturated tail of a cell.
    pub tail_saturations: u64,
}

impl RbpDiagnostics {
    fn merge(self, o: Self) -> Self {
        Self {
            floor_hits: self.floor_hits + o.floor_hits,
            ceiling_hits: self.ceiling_hits + o.ceiling_hits,
            tail_saturations: self.tail_saturations + o.tail_saturations,
        }
    }
}

/// Per-edge messages, all stored as `m × n` column-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RbpState {
    /// `x̂_{i→a}`
    pub xhat_edges: DMatrix<f64>,
    /// `τ̂_{i→a}`
    pub tau_edges: DMatrix<f64>,
    /// `u_{a→i}`
    pub u_edges: DMatrix<f64>,
    /// `τ_{a→i}`
    pub tauout_edges: DMatrix<f64>,
    pub iteration: usize,
    pub diagnostics: RbpDiagnostics,
}

impl RbpState {
    /// Variable messages at the prior mean and variance; measurement
    /// messages zeroed until the first update.
    pub fn init(ensemble: &MeasurementEnsemble, prior: &GaussBernoulliPrior) -> Self {
        let (m, n) = (ensemble.m(), ensemble.n());
        Self {
            xhat_edges: DMatrix::from_element(m, n, prior.mean()),
            tau_edges: DMatrix::from_element(m, n, prior.variance()),
            u_edges: DMatrix::zeros(m, n),
            tauout_edges: DMatrix::zeros(m, n),
            iteration: 0,
            diagnostics: RbpDiagnostics::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbpOptions {
    pub t_max: usize,
    /// Convex weight on the new messages; `1.0` disables damping.
    pub damping: f64,
    /// Stop once `‖x̂_t − x̂_{t−1}‖² / ‖x̂_t‖²` falls below this.
    pub early_stop: Option<f64>,
}

impl Default for RbpOptions {
    fn default() -> Self {
        Self {
            t_max: 20,
            damping: 1.0,
            early_stop: Some(1e-8),
        }
    }
}

impl RbpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

fn check_measurements(
    ensemble: &MeasurementEnsemble,
    channel: &QuantizedAwgnChannel,
    y: &[usize],
) -> Result<()> {
    if y.len() != ensemble.m() {
        return Err(Error::InvalidInput(format!(
            "{} measurements for a matrix with {} rows",
            y.len(),
            ensemble.m()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&ya| ya >= channel.num_levels()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            levels: channel.num_levels(),
        });
    }
    Ok(())
}

#[inline]
fn blend(new: f64, old: f64, theta: f64) -> f64 {
    if theta >= 1.0 {
        new
    } else {
        theta * new + (1.0 - theta) * old
    }
}

/// One full round: measurement updates from the current variable messages,
/// then variable updates from the new measurement messages.
pub fn iterate(
    state: &mut RbpState,
    ensemble: &MeasurementEnsemble,
    channel: &QuantizedAwgnChannel,
    prior: &GaussBernoulliPrior,
    y: &[usize],
) -> Result<()> {
    iterate_damped(state, ensemble, channel, prior, y, 1.0)
}

pub fn iterate_damped(
    state: &mut RbpState,
    ensemble: &MeasurementEnsemble,
    channel: &QuantizedAwgnChannel,
    prior: &GaussBernoulliPrior,
    y: &[usize],
    damping: f64,
) -> Result<()> {
    check_measurements(ensemble, channel, y)?;
    let m = ensemble.m();
    let a = ensemble.matrix().as_slice();
    let theta = if state.iteration == 0 { 1.0 } else { damping };
    let sigma2 = channel.sigma2;

    // Full sums per measurement node, accumulated in a fixed order.
    let mut zsum = vec![0.0; m];
    let mut vsum = vec![0.0; m];
    for ((acol, xcol), tcol) in a
        .chunks_exact(m)
        .zip(state.xhat_edges.as_slice().chunks_exact(m))
        .zip(state.tau_edges.as_slice().chunks_exact(m))
    {
        for r in 0..m {
            zsum[r] += acol[r] * xcol[r];
            vsum[r] += acol[r] * acol[r] * tcol[r];
        }
    }

    let measurement_diag = a
        .par_chunks_exact(m)
        .zip(state.xhat_edges.as_slice().par_chunks_exact(m))
        .zip(state.tau_edges.as_slice().par_chunks_exact(m))
        .zip(state.u_edges.as_mut_slice().par_chunks_exact_mut(m))
        .zip(state.tauout_edges.as_mut_slice().par_chunks_exact_mut(m))
        .map(|((((acol, xcol), tcol), ucol), ocol)| {
            let mut diag = RbpDiagnostics::default();
            for r in 0..m {
                let aai = acol[r];
                let zhat = zsum[r] - aai * xcol[r];
                let mut nu = (vsum[r] - aai * aai * tcol[r]).max(0.0) + sigma2;
                if nu < VARIANCE_FLOOR {
                    nu = VARIANCE_FLOOR;
                    diag.floor_hits += 1;
                }
                let s = channel.scores_unchecked(y[r], zhat, nu);
                if s.saturated {
                    diag.tail_saturations += 1;
                }
                ucol[r] = blend(-s.d1, ucol[r], theta);
                ocol[r] = blend(s.d2.max(VARIANCE_FLOOR), ocol[r], theta);
            }
            diag
        })
        .reduce(RbpDiagnostics::default, RbpDiagnostics::merge);

    let ceiling = prior.variance() * (1.0 + VARIANCE_CEILING_SLACK);
    let variable_diag = a
        .par_chunks_exact(m)
        .zip(state.u_edges.as_slice().par_chunks_exact(m))
        .zip(state.tauout_edges.as_slice().par_chunks_exact(m))
        .zip(state.xhat_edges.as_mut_slice().par_chunks_exact_mut(m))
        .zip(state.tau_edges.as_mut_slice().par_chunks_exact_mut(m))
        .map(|((((acol, ucol), ocol), xcol), tcol)| {
            let mut diag = RbpDiagnostics::default();
            let mut usum = 0.0;
            let mut wsum = 0.0;
            for r in 0..m {
                usum += acol[r] * ucol[r];
                wsum += acol[r] * acol[r] * ocol[r];
            }
            for r in 0..m {
                let aai = acol[r];
                let mut w = wsum - aai * aai * ocol[r];
                if w < VARIANCE_FLOOR {
                    w = VARIANCE_FLOOR;
                    diag.floor_hits += 1;
                }
                let q = (usum - aai * ucol[r]) / w;
                let post = prior.posterior_unchecked(q, 1.0 / w);
                let mut tau = post.var;
                if tau < VARIANCE_FLOOR {
                    tau = VARIANCE_FLOOR;
                    diag.floor_hits += 1;
                } else if tau > ceiling {
                    tau = ceiling;
                    diag.ceiling_hits += 1;
                }
                xcol[r] = blend(post.mean, xcol[r], theta);
                tcol[r] = blend(tau, tcol[r], theta);
            }
            diag
        })
        .reduce(RbpDiagnostics::default, RbpDiagnostics::merge);

    state.diagnostics = state
        .diagnostics
        .merge(measurement_diag)
        .merge(variable_diag);
    state.iteration += 1;
    Ok(())
}

/// Signal estimate from full (non-excluded) sums over the latest
/// measurement messages.
pub fn estimate(
    state: &RbpState,
    ensemble: &MeasurementEnsemble,
    prior: &GaussBernoulliPrior,
) -> Result<Vec<f64>> {
    if state.iteration == 0 {
        return Err(Error::InvalidInput(
            "estimate requires at least one completed iteration".into(),
        ));
    }
    let m = ensemble.m();
    Ok(ensemble
        .matrix()
        .as_slice()
        .par_chunks_exact(m)
        .zip(state.u_edges.as_slice().par_chunks_exact(m))
        .zip(state.tauout_edges.as_slice().par_chunks_exact(m))
        .map(|((acol, ucol), ocol)| {
            let mut usum = 0.0;
            let mut wsum = 0.0;
            for r in 0..m {
                usum += acol[r] * ucol[r];
                wsum += acol[r] * acol[r] * ocol[r];
            }
            let w = wsum.max(VARIANCE_FLOOR);
            prior.posterior_unchecked(usum / w, 1.0 / w).mean
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbpOutcome {
    pub estimate: Vec<f64>,
    /// Per-iteration MSE against the supplied truth, starting with the
    /// prior-mean estimate at `t = 0`.
    pub mse_trace: Option<Vec<f64>>,
    pub iterations: usize,
    pub early_stopped: bool,
    pub diagnostics: RbpDiagnostics,
}

pub fn mse(x: &[f64], xhat: &[f64]) -> f64 {
    x.iter()
        .zip(xhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64
}

/// Runs up to `options.t_max` iterations from the prior initialization.
pub fn run(
    ensemble: &MeasurementEnsemble,
    channel: &QuantizedAwgnChannel,
    prior: &GaussBernoulliPrior,
    y: &[usize],
    options: &RbpOptions,
    truth: Option<&[f64]>,
) -> Result<RbpOutcome> {
    options.validate()?;
    check_measurements(ensemble, channel, y)?;
    if let Some(x) = truth {
        if x.len() != ensemble.n() {
            return Err(Error::InvalidInput(format!(
                "truth has length {}, expected {}",
                x.len(),
                ensemble.n()
            )));
        }
    }
    let mut state = RbpState::init(ensemble, prior);
    let mut trace = truth.map(|x| vec![mse(x, &vec![prior.mean(); x.len()])]);
    let mut early_stopped = false;
    let mut current: Vec<f64> = Vec::new();
    for _ in 0..options.t_max {
        iterate_damped(&mut state, ensemble, channel, prior, y, options.damping)?;
        let next = estimate(&state, ensemble, prior)?;
        if let (Some(tr), Some(x)) = (trace.as_mut(), truth) {
            tr.push(mse(x, &next));
        }
        let converged = match options.early_stop {
            Some(tol) if !current.is_empty() => {
                let change: f64 = next
                    .iter()
                    .zip(&current)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let norm: f64 = next.iter().map(|a| a * a).sum();
                change <= tol * norm.max(f64::MIN_POSITIVE)
            }
            _ => false,
        };
        current = next;
        if converged {
            early_stopped = true;
            break;
        }
    }
    Ok(RbpOutcome {
        estimate: current,
        mse_trace: trace,
        iterations: state.iteration,
        early_stopped,
        diagnostics: state.diagnostics,
    })
}
