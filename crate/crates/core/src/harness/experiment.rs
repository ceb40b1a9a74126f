//! Seeded multi-trial experiments: sample, measure, reconstruct, score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    load_quantizer, DesignFileConfig, ExperimentConfig, Method, QuantizerKind, Resolved,
    SeFileConfig,
};
use crate::baselines::{
    centroid_mse, dequantize, lmmse_input_std, lmmse_predicted_mse, LmmseModel,
};
use crate::channel::QuantizedAwgnChannel;
use crate::designer::{
    optimize_boundaries, sweep_beta, DesignProblem, DesignResult, OptimizerSettings,
};
use crate::error::{Error, Result};
use crate::prior::GaussBernoulliPrior;
use crate::quantizer::RegularScalarQuantizer;
use crate::rbp::{self, MeasurementEnsemble, RbpDiagnostics};
use crate::state_evolution::{to_db, SeConfig, SeTrace, StateEvolution};

/// Bumped whenever a report field is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

const STREAM_SIGNAL: u64 = 0;
const STREAM_MATRIX: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for random stream `stream` of trial `trial`.
pub fn derive_seed(master: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub signal: u64,
    pub matrix: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: u64) -> Self {
        Self {
            signal: derive_seed(master, trial, STREAM_SIGNAL),
            matrix: derive_seed(master, trial, STREAM_MATRIX),
            noise: derive_seed(master, trial, STREAM_NOISE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seeds: TrialSeeds,
    pub mse: Option<f64>,
    pub mse_db: Option<f64>,
    pub iterations: usize,
    pub early_stopped: bool,
    pub diagnostics: RbpDiagnostics,
    pub error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub completed: usize,
    pub failed: usize,
    /// Some trials failed; aggregates cover the completed ones only.
    pub partial: bool,
    pub median_mse: Option<f64>,
    pub median_mse_db: Option<f64>,
    pub mean_mse: Option<f64>,
    pub mean_mse_db: Option<f64>,
    /// `se_fixed_point` for rbp, `lmmse_large_system` for lmmse.
    pub prediction: String,
    pub predicted_mse: f64,
    pub predicted_mse_db: f64,
    /// SE value after `t_max` iterations (rbp only).
    pub se_at_t_max_db: Option<f64>,
    /// `median_mse_db − predicted_mse_db`.
    pub gap_db: Option<f64>,
    pub diagnostics: RbpDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub summary: Summary,
    pub trials: Vec<TrialRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Quantizer input spread `√(β·τ + σ²)` assumed by every design.
pub fn input_std(beta: f64, prior: &GaussBernoulliPrior, sigma2: f64) -> f64 {
    (beta * prior.variance() + sigma2).sqrt()
}

/// Builds the quantizer named by `kind`. `optimal` runs the designer.
pub fn build_quantizer(
    kind: QuantizerKind,
    n_levels: usize,
    beta: f64,
    prior: &GaussBernoulliPrior,
    sigma2: f64,
    settings: &OptimizerSettings,
    file: Option<&std::path::Path>,
) -> Result<RegularScalarQuantizer> {
    let uniform = RegularScalarQuantizer::design_uniform(n_levels, input_std(beta, prior, sigma2))?;
    match kind {
        QuantizerKind::Uniform => Ok(uniform),
        QuantizerKind::Optimal => {
            let mut config = SeConfig::new(beta, sigma2, *prior, uniform)?;
            config.t_max = 200;
            Ok(optimize_boundaries(n_levels, &config, settings)?.quantizer)
        }
        QuantizerKind::File => {
            let path = file.ok_or_else(|| Error::Config("quantizer file not given".into()))?;
            load_quantizer(path)
        }
    }
}

pub fn resolve(config: &ExperimentConfig) -> Result<Resolved> {
    config.validate()?;
    let (m, beta) = config.dimensions()?;
    let prior = config.prior()?;
    let quantizer = if config.quantizer == QuantizerKind::File {
        let q = load_quantizer(config.quantizer_file.as_deref().expect("validated"))?;
        if let Some(n) = config.n_levels {
            if n != q.num_levels() {
                return Err(Error::Config(format!(
                    "n_levels = {n} but the quantizer file has {} levels",
                    q.num_levels()
                )));
            }
        }
        q
    } else {
        build_quantizer(
            config.quantizer,
            config.levels()?,
            beta,
            &prior,
            config.sigma2,
            &config.design,
            None,
        )?
    };
    Ok(Resolved {
        n: config.n,
        m,
        beta,
        n_levels: quantizer.num_levels(),
        quantizer,
    })
}

/// Truth and estimate of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

fn run_trial_inner(
    config: &ExperimentConfig,
    resolved: &Resolved,
    seeds: &TrialSeeds,
) -> Result<(Instance, usize, bool, RbpDiagnostics)> {
    let prior = config.prior()?;
    let channel = QuantizedAwgnChannel::new(resolved.quantizer.clone(), config.sigma2)?;
    let x = prior.sample_signal(resolved.n, seeds.signal);
    let ens = MeasurementEnsemble::generate(resolved.m, resolved.n, seeds.matrix)?;
    let z = ens.apply(&x);
    let y = channel.measure(&z, seeds.noise)?;
    match config.method {
        Method::Rbp => {
            let out = rbp::run(&ens, &channel, &prior, &y, &config.rbp_options(), None)?;
            Ok((
                Instance {
                    truth: x,
                    estimate: out.estimate,
                },
                out.iterations,
                out.early_stopped,
                out.diagnostics,
            ))
        }
        Method::Lmmse => {
            let sd = lmmse_input_std(resolved.beta, prior.variance(), config.sigma2);
            let yhat = dequantize(&resolved.quantizer, &y, sd)?;
            let model = LmmseModel::for_channel(&ens, &prior, &channel)?;
            let estimate = model.reconstruct(&yhat)?;
            Ok((
                Instance { truth: x, estimate },
                0,
                false,
                RbpDiagnostics::default(),
            ))
        }
    }
}

/// Runs trial `trial` and keeps its signal and estimate.
pub fn run_trial(
    config: &ExperimentConfig,
    resolved: &Resolved,
    trial: u64,
) -> (TrialRecord, Option<Instance>) {
    let seeds = TrialSeeds::derive(config.seed, trial);
    match run_trial_inner(config, resolved, &seeds) {
        Ok((inst, iterations, early_stopped, diagnostics)) => {
            let mse = rbp::mse(&inst.truth, &inst.estimate);
            (
                TrialRecord {
                    trial,
                    seeds,
                    mse: Some(mse),
                    mse_db: Some(to_db(mse)),
                    iterations,
                    early_stopped,
                    diagnostics,
                    error: None,
                },
                Some(inst),
            )
        }
        Err(e) => (
            TrialRecord {
                trial,
                seeds,
                mse: None,
                mse_db: None,
                iterations: 0,
                early_stopped: false,
                diagnostics: RbpDiagnostics::default(),
                error: Some((&e).into()),
            },
            None,
        ),
    }
}

/// The large-system prediction for `config`'s method:
/// `(label, predicted MSE, SE value at t_max)`.
pub fn prediction(
    config: &ExperimentConfig,
    resolved: &Resolved,
) -> Result<(String, f64, Option<f64>)> {
    let prior = config.prior()?;
    match config.method {
        Method::Rbp => {
            let mut se = SeConfig::new(
                resolved.beta,
                config.sigma2,
                prior,
                resolved.quantizer.clone(),
            )?;
            se.t_max = 500;
            let tr = StateEvolution::default().recursion(&se)?;
            let at_t = tr.values[config.t_max.min(tr.values.len() - 1)];
            Ok(("se_fixed_point".into(), tr.fixed_point, Some(at_t)))
        }
        Method::Lmmse => {
            let sd = lmmse_input_std(resolved.beta, prior.variance(), config.sigma2);
            let s2 = config.sigma2 + centroid_mse(&resolved.quantizer, sd)?;
            Ok((
                "lmmse_large_system".into(),
                lmmse_predicted_mse(resolved.beta, prior.variance(), s2),
                None,
            ))
        }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

pub(crate) fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every trial of `config` with an already-resolved quantizer.
pub fn run_resolved(config: &ExperimentConfig, resolved: Resolved) -> Result<RunReport> {
    config.validate()?;
    let trials: Vec<TrialRecord> = with_workers(config.workers, || {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|k| run_trial(config, &resolved, k).0)
            .collect()
    })?;
    assemble(config, resolved, trials)
}

fn assemble(
    config: &ExperimentConfig,
    resolved: Resolved,
    trials: Vec<TrialRecord>,
) -> Result<RunReport> {
    let (label, predicted, at_t) = prediction(config, &resolved)?;
    let mut mses: Vec<f64> = trials.iter().filter_map(|t| t.mse).collect();
    let completed = mses.len();
    let failed = trials.len() - completed;
    let mean = (completed > 0).then(|| mses.iter().sum::<f64>() / completed as f64);
    let med = median(&mut mses);
    let diagnostics = trials
        .iter()
        .fold(RbpDiagnostics::default(), |acc, t| RbpDiagnostics {
            floor_hits: acc.floor_hits + t.diagnostics.floor_hits,
            ceiling_hits: acc.ceiling_hits + t.diagnostics.ceiling_hits,
            tail_saturations: acc.tail_saturations + t.diagnostics.tail_saturations,
        });
    let predicted_db = to_db(predicted);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        config: config.clone(),
        resolved,
        summary: Summary {
            completed,
            failed,
            partial: failed > 0,
            median_mse: med,
            median_mse_db: med.map(to_db),
            mean_mse: mean,
            mean_mse_db: mean.map(to_db),
            prediction: label,
            predicted_mse: predicted,
            predicted_mse_db: predicted_db,
            se_at_t_max_db: at_t.map(to_db),
            gap_db: med.map(|v| to_db(v) - predicted_db),
            diagnostics,
        },
        trials,
    })
}

/// Resolves the quantizer and runs every trial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let resolved = resolve(config)?;
    run_resolved(config, resolved)
}

/// Runs the first trial only, returning its report and the reconstruction.
pub fn reconstruct(config: &ExperimentConfig) -> Result<(RunReport, Option<Instance>)> {
    let single = ExperimentConfig {
        trials: 1,
        ..config.clone()
    };
    let resolved = resolve(&single)?;
    let (record, inst) = run_trial(&single, &resolved, 0);
    let report = assemble(&single, resolved, vec![record])?;
    Ok((report, inst))
}

/// Evaluates the SE recursion for an `se` config file.
pub fn run_se(config: &SeFileConfig) -> Result<SeTrace> {
    let prior = GaussBernoulliPrior::new(config.rho)?;
    let q = build_quantizer(
        config.quantizer,
        config.n_levels,
        config.beta,
        &prior,
        config.sigma2,
        &config.design,
        config.quantizer_file.as_deref(),
    )?;
    let mut se = SeConfig::new(config.beta, config.sigma2, prior, q)?;
    se.t_max = config.t_max;
    se.fp_tol = config.fp_tol;
    StateEvolution::default().recursion(&se)
}

/// Runs the β sweep for a `design` config file.
pub fn run_design(config: &DesignFileConfig) -> Result<DesignResult> {
    let prior = GaussBernoulliPrior::new(config.rho)?;
    let mut problem = DesignProblem::new(
        config.rate_x,
        config.beta_grid.clone(),
        prior,
        config.sigma2,
    );
    problem.n_levels = config.n_levels;
    problem.t_max = config.t_max;
    problem.fp_tol = config.fp_tol;
    problem.settings = config.optimizer.clone();
    sweep_beta(&problem)
}
