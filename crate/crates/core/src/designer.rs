//! Quantizer design by minimizing the state-evolution fixed point.
//!
//! Boundaries are searched in an unconstrained parameterization
//! `θ_0 = b_1`, `b_{k+1} = b_k + exp(θ_k)`, so every θ decodes to a strictly
//! increasing boundary vector. The objective is `ln ν̄*`; SE evaluations that
//! fail or saturate count as `+∞`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{bfgs_polish, nelder_mead, BfgsOptions, NelderMeadOptions};
use crate::prior::GaussBernoulliPrior;
use crate::quantizer::RegularScalarQuantizer;
use crate::state_evolution::{to_db, SeConfig, StateEvolution};

/// Relative slack under which a symmetrized design replaces the optimizer's.
const SYMMETRIZE_SLACK: f64 = 1e-9;
/// How far past the outermost boundary a padded start puts its new boundary,
/// in units of the quantizer input standard deviation.
const PAD_DISTANCE: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Objective evaluations allowed per simplex search.
    pub max_evals: usize,
    /// Extra random starts on top of the uniform and zero-concentrated ones.
    pub restarts: usize,
    /// Central-difference step as a fraction of the boundary spread.
    pub fd_step: f64,
    pub polish_iters: usize,
    /// Contraction applied to the uniform design for the second start.
    pub shrink: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_evals: 1500,
            restarts: 0,
            fd_step: 1e-4,
            polish_iters: 40,
            shrink: 0.5,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 10 {
            return Err(Error::InvalidParameter(
                "max_evals must be at least 10".into(),
            ));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "finite-difference step must lie in (0, 1), got {}",
                self.fd_step
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub rate_x: f64,
    pub beta_grid: Vec<f64>,
    /// Overrides the rate-derived level count for every β.
    pub n_levels: Option<usize>,
    pub prior: GaussBernoulliPrior,
    pub sigma2: f64,
    pub t_max: usize,
    pub fp_tol: f64,
    pub settings: OptimizerSettings,
}

impl DesignProblem {
    pub fn new(rate_x: f64, beta_grid: Vec<f64>, prior: GaussBernoulliPrior, sigma2: f64) -> Self {
        Self {
            rate_x,
            beta_grid,
            n_levels: None,
            prior,
            sigma2,
            t_max: 200,
            fp_tol: 1e-8,
            settings: OptimizerSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_x > 0.0 && self.rate_x.is_finite()) {
            return Err(Error::Config(format!(
                "rate_x must be positive, got {}",
                self.rate_x
            )));
        }
        if self.beta_grid.is_empty() {
            return Err(Error::Config("beta_grid is empty".into()));
        }
        if let Some(n) = self.n_levels {
            if n < 2 {
                return Err(Error::Config(format!("need at least 2 levels, got {n}")));
            }
        }
        self.settings.validate()
    }

    /// Level count for `beta`: the override if set, else `2^{β·R_x}` when that
    /// is an integer of at least 2.
    pub fn n_for(&self, beta: f64) -> Option<usize> {
        match self.n_levels {
            Some(n) => Some(n),
            None => levels_for(beta, self.rate_x),
        }
    }

    pub fn se_config(&self, beta: f64, quantizer: RegularScalarQuantizer) -> Result<SeConfig> {
        let mut c = SeConfig::new(beta, self.sigma2, self.prior, quantizer)?;
        c.t_max = self.t_max;
        c.fp_tol = self.fp_tol;
        Ok(c)
    }
}

/// `2^{β·R_x}` if `β·R_x` is a positive integer (to within `1e-9`) small
/// enough to address.
pub fn levels_for(beta: f64, rate_x: f64) -> Option<usize> {
    let bits = beta * rate_x;
    let k = bits.round();
    if beta.is_nan() || beta <= 0.0 || (bits - k).abs() > 1e-9 || !(1.0..=30.0).contains(&k) {
        return None;
    }
    Some(1usize << (k as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub quantizer: RegularScalarQuantizer,
    pub predicted_mse: f64,
    pub uniform_mse: f64,
    /// `max_i |b_i + b_{N−i}|` divided by the boundary spread.
    pub symmetry_defect: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub beta: f64,
    pub n_levels: usize,
    pub fixed_point: f64,
    pub fixed_point_db: f64,
    pub uniform_fixed_point: f64,
    pub uniform_fixed_point_db: f64,
    pub boundaries: Vec<f64>,
    pub symmetry_defect: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub best_beta: f64,
    pub quantizer: RegularScalarQuantizer,
    pub predicted_mse: f64,
    pub predicted_mse_db: f64,
    pub table: Vec<BetaEntry>,
    /// Grid values with no admissible level count.
    pub skipped_betas: Vec<f64>,
}

impl DesignResult {
    pub fn best_entry(&self) -> &BetaEntry {
        self.table
            .iter()
            .find(|e| e.beta == self.best_beta)
            .expect("best beta is in the table")
    }

    /// CSV with one row per (β, boundary index).
    pub fn boundaries_csv(&self) -> String {
        let mut out = String::from("beta,n_levels,index,boundary\n");
        for e in &self.table {
            for (i, b) in e.boundaries.iter().enumerate() {
                out.push_str(&format!("{},{},{},{:.12e}\n", e.beta, e.n_levels, i + 1, b));
            }
        }
        out
    }
}

/// `θ → b`. Strictly increasing for every finite θ whose gaps stay finite;
/// a gap lost to rounding becomes one ulp.
pub fn decode(theta: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(theta.len());
    let mut cur = theta[0];
    b.push(cur);
    for t in &theta[1..] {
        let next = cur + t.exp();
        cur = if next > cur { next } else { cur.next_up() };
        b.push(cur);
    }
    b
}

/// `b → θ` for strictly increasing `b`.
pub fn encode(boundaries: &[f64]) -> Vec<f64> {
    let mut theta = Vec::with_capacity(boundaries.len());
    theta.push(boundaries[0]);
    for w in boundaries.windows(2) {
        theta.push((w[1] - w[0]).ln());
    }
    theta
}

/// `max_i |b_i + b_{N−i}|`.
pub fn asymmetry(boundaries: &[f64]) -> f64 {
    let k = boundaries.len();
    (0..k)
        .map(|i| (boundaries[i] + boundaries[k - 1 - i]).abs())
        .fold(0.0, f64::max)
}

pub fn symmetrize(boundaries: &[f64]) -> Vec<f64> {
    let k = boundaries.len();
    (0..k)
        .map(|i| 0.5 * (boundaries[i] - boundaries[k - 1 - i]))
        .collect()
}

/// Appends a boundary far above the last one, giving an `N+1`-level
/// quantizer that behaves like the `N`-level one.
pub fn pad_boundaries(boundaries: &[f64], input_std: f64) -> Vec<f64> {
    let mut b = boundaries.to_vec();
    let last = *b.last().expect("at least one boundary");
    b.push(last.max(0.0) + PAD_DISTANCE * input_std);
    b
}

fn spread(boundaries: &[f64]) -> f64 {
    boundaries[boundaries.len() - 1] - boundaries[0]
}

/// Cached SE objective over θ.
pub struct Objective<'a> {
    config: &'a SeConfig,
    se: StateEvolution,
    cache: HashMap<Vec<u64>, f64>,
    pub evaluations: usize,
}

impl<'a> Objective<'a> {
    pub fn new(config: &'a SeConfig) -> Self {
        Self {
            config,
            se: StateEvolution::default(),
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    /// SE fixed point for explicit boundaries, `+∞` when infeasible.
    pub fn fixed_point(&self, boundaries: &[f64]) -> f64 {
        if boundaries.iter().any(|b| !b.is_finite()) {
            return f64::INFINITY;
        }
        let Ok(q) = RegularScalarQuantizer::new(boundaries.to_vec()) else {
            return f64::INFINITY;
        };
        match self.se.recursion(&self.config.with_quantizer(q)) {
            Ok(tr) if !tr.saturated && tr.fixed_point.is_finite() && tr.fixed_point > 0.0 => {
                tr.fixed_point
            }
            _ => f64::INFINITY,
        }
    }

    /// `ln ν̄*(decode(θ))`, memoized on the bit pattern of θ.
    pub fn value(&mut self, theta: &[f64]) -> f64 {
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        self.evaluations += 1;
        let v = self.fixed_point(&decode(theta)).ln();
        self.cache.insert(key, v);
        v
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

/// Minimizes the SE fixed point over `n_levels`-level quantizers.
pub fn optimize_boundaries(
    n_levels: usize,
    config: &SeConfig,
    settings: &OptimizerSettings,
) -> Result<Design> {
    optimize_boundaries_with_starts(n_levels, config, settings, &[])
}

/// As [`optimize_boundaries`], with additional caller-supplied starting
/// boundary vectors (e.g. a padded lower-rate optimum).
pub fn optimize_boundaries_with_starts(
    n_levels: usize,
    config: &SeConfig,
    settings: &OptimizerSettings,
    extra_starts: &[Vec<f64>],
) -> Result<Design> {
    if n_levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 levels, got {n_levels}"
        )));
    }
    settings.validate()?;
    config.validate()?;
    let input_std = config.input_std();
    let uniform = RegularScalarQuantizer::design_uniform(n_levels, input_std)?;
    let ub = uniform.boundaries().to_vec();

    let mut starts = vec![ub.clone()];
    if n_levels > 2 {
        starts.push(ub.iter().map(|b| b * settings.shrink).collect());
    } else {
        starts.push(vec![0.25 * input_std]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.restarts {
        let scale: f64 = rng.random_range(0.3..1.5);
        let shift: f64 = rng.random_range(-0.2..0.2) * input_std;
        starts.push(ub.iter().map(|b| b * scale + shift).collect());
    }
    for s in extra_starts {
        if s.len() != n_levels - 1 {
            return Err(Error::InvalidInput(format!(
                "start has {} boundaries, expected {}",
                s.len(),
                n_levels - 1
            )));
        }
        RegularScalarQuantizer::new(s.clone())?;
        starts.push(s.clone());
    }

    let mut obj = Objective::new(config);
    let uniform_value = obj.value(&encode(&ub));
    let nm = NelderMeadOptions {
        max_evals: settings.max_evals,
        f_tol: 1e-10,
        x_tol: 1e-7,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let theta0 = encode(start);
        let mut f = |t: &[f64]| obj.value(t);
        let steps: Vec<f64> = theta0
            .iter()
            .enumerate()
            .map(|(i, _)| if i == 0 { 0.1 * input_std } else { 0.15 })
            .collect();
        let m = nelder_mead(&mut f, &theta0, &steps, &nm);
        let x = if m.f.is_finite() { m.x } else { theta0 };
        let s = spread(&decode(&x)).max(input_std);
        let h: Vec<f64> = (0..x.len())
            .map(|i| {
                if i == 0 {
                    settings.fd_step * s
                } else {
                    settings.fd_step
                }
            })
            .collect();
        let p = bfgs_polish(
            &mut f,
            &x,
            &h,
            &BfgsOptions {
                max_iters: settings.polish_iters,
                max_evals: 20 * settings.polish_iters * x.len(),
                f_tol: 1e-13,
            },
        );
        if p.f.is_finite() && best.as_ref().is_none_or(|(_, bf)| p.f < *bf) {
            best = Some((p.x, p.f));
        }
    }

    let Some((theta, value)) = best else {
        return Err(Error::DesignFailure(format!(
            "all {} starts gave infeasible SE evaluations for N = {n_levels} \
             (uniform objective {uniform_value})",
            starts.len()
        )));
    };
    let uniform_fp = obj.fixed_point(&ub);
    let mut boundaries = decode(&theta);
    let mut fp = obj.fixed_point(&boundaries);
    debug_assert!((fp.ln() - value).abs() < 1e-12);
    let sym = symmetrize(&boundaries);
    if sym.windows(2).all(|w| w[0] < w[1]) {
        let fs = obj.fixed_point(&sym);
        if fs <= fp * (1.0 + SYMMETRIZE_SLACK) {
            boundaries = sym;
            fp = fs;
        }
    }
    // never report worse than the starting design
    if fp > uniform_fp {
        boundaries = ub;
        fp = uniform_fp;
    }
    let evaluations = obj.evaluations;
    let symmetry_defect = asymmetry(&boundaries) / spread(&boundaries).max(input_std);
    Ok(Design {
        quantizer: RegularScalarQuantizer::new(boundaries)?,
        predicted_mse: fp,
        uniform_mse: uniform_fp,
        symmetry_defect,
        evaluations,
    })
}

/// Designs a quantizer for every admissible β and keeps the best.
pub fn sweep_beta(problem: &DesignProblem) -> Result<DesignResult> {
    problem.validate()?;
    let mut feasible = Vec::new();
    let mut skipped_betas = Vec::new();
    for &beta in &problem.beta_grid {
        match problem.n_for(beta) {
            Some(n) if beta > 0.0 && beta.is_finite() => feasible.push((beta, n)),
            _ => skipped_betas.push(beta),
        }
    }
    if feasible.is_empty() {
        return Err(Error::Config(format!(
            "no beta in {:?} gives an integer level count for rate {}",
            problem.beta_grid, problem.rate_x
        )));
    }
    let table: Vec<BetaEntry> = feasible
        .par_iter()
        .map(|&(beta, n)| -> Result<BetaEntry> {
            let sd = (beta * problem.prior.variance() + problem.sigma2).sqrt();
            let config = problem.se_config(beta, RegularScalarQuantizer::design_uniform(n, sd)?)?;
            let d = optimize_boundaries(n, &config, &problem.settings)?;
            Ok(BetaEntry {
                beta,
                n_levels: n,
                fixed_point: d.predicted_mse,
                fixed_point_db: to_db(d.predicted_mse),
                uniform_fixed_point: d.uniform_mse,
                uniform_fixed_point_db: to_db(d.uniform_mse),
                boundaries: d.quantizer.boundaries().to_vec(),
                symmetry_defect: d.symmetry_defect,
                evaluations: d.evaluations,
            })
        })
        .collect::<Result<_>>()?;
    let best = table
        .iter()
        .min_by(|a, b| a.fixed_point.total_cmp(&b.fixed_point))
        .expect("nonempty table");
    Ok(DesignResult {
        best_beta: best.beta,
        quantizer: RegularScalarQuantizer::new(best.boundaries.clone())?,
        predicted_mse: best.fixed_point,
        predicted_mse_db: best.fixed_point_db,
        table: table.clone(),
        skipped_betas,
    })
}
