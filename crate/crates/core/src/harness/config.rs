//! Experiment, SE, design and sweep configuration files (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::designer::{levels_for, OptimizerSettings};
use crate::error::{Error, Result};
use crate::prior::GaussBernoulliPrior;
use crate::quantizer::RegularScalarQuantizer;
use crate::rbp::RbpOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rbp,
    Lmmse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rbp => "rbp",
            Method::Lmmse => "lmmse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizerKind {
    Uniform,
    Optimal,
    File,
}

impl QuantizerKind {
    pub fn name(self) -> &'static str {
        match self {
            QuantizerKind::Uniform => "uniform",
            QuantizerKind::Optimal => "optimal",
            QuantizerKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbpSection {
    pub damping: f64,
    /// Relative change below which iterations stop early; absent disables.
    pub early_stop: Option<f64>,
}

impl Default for RbpSection {
    fn default() -> Self {
        let d = RbpOptions::default();
        Self {
            damping: d.damping,
            early_stop: d.early_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Measurement ratio `n/m`; give this or `m`.
    pub beta: Option<f64>,
    pub m: Option<usize>,
    pub rho: f64,
    pub sigma2: f64,
    /// Bits per signal component; sets `N = 2^{β·rate_x}` unless `n_levels`
    /// is given.
    pub rate_x: Option<f64>,
    pub n_levels: Option<usize>,
    pub quantizer: QuantizerKind,
    /// JSON quantizer, read when `quantizer = "file"`.
    pub quantizer_file: Option<PathBuf>,
    pub method: Method,
    pub trials: usize,
    pub t_max: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub rbp: RbpSection,
    pub design: OptimizerSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            beta: Some(2.0),
            m: None,
            rho: 0.1,
            sigma2: 1e-5,
            rate_x: Some(1.0),
            n_levels: None,
            quantizer: QuantizerKind::Uniform,
            quantizer_file: None,
            method: Method::Rbp,
            trials: 20,
            t_max: 20,
            seed: 0,
            workers: None,
            rbp: RbpSection::default(),
            design: OptimizerSettings::default(),
        }
    }
}

/// Dimensions and quantizer resolved from an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub n_levels: usize,
    pub quantizer: RegularScalarQuantizer,
}

impl ExperimentConfig {
    pub fn prior(&self) -> Result<GaussBernoulliPrior> {
        GaussBernoulliPrior::new(self.rho)
    }

    pub fn rbp_options(&self) -> RbpOptions {
        RbpOptions {
            t_max: self.t_max,
            damping: self.rbp.damping,
            early_stop: self.rbp.early_stop,
        }
    }

    /// `(m, β)` with `β = n/m` recomputed from the integer `m`.
    pub fn dimensions(&self) -> Result<(usize, f64)> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let m = match (self.m, self.beta) {
            (Some(m), Some(beta)) => {
                if (self.n as f64 / m as f64 - beta).abs() > 1e-9 * beta {
                    return Err(Error::Config(format!(
                        "beta = {beta} is inconsistent with n = {} and m = {m}",
                        self.n
                    )));
                }
                m
            }
            (Some(m), None) => m,
            (None, Some(beta)) => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Config(format!("beta must be positive, got {beta}")));
                }
                (self.n as f64 / beta).round() as usize
            }
            (None, None) => return Err(Error::Config("one of beta or m is required".into())),
        };
        if m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        Ok((m, self.n as f64 / m as f64))
    }

    /// Level count from `n_levels`, else from `rate_x` and the nominal β.
    pub fn levels(&self) -> Result<usize> {
        if let Some(n) = self.n_levels {
            if n < 2 {
                return Err(Error::Config(format!(
                    "n_levels must be at least 2, got {n}"
                )));
            }
            return Ok(n);
        }
        let rate = self
            .rate_x
            .ok_or_else(|| Error::Config("one of n_levels or rate_x is required".into()))?;
        let beta = match self.beta {
            Some(b) => b,
            None => self.dimensions()?.1,
        };
        levels_for(beta, rate).ok_or_else(|| {
            Error::Config(format!(
                "2^(beta·rate_x) is not an integer level count for beta = {beta}, rate_x = {rate}"
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.dimensions()?;
        if self.quantizer != QuantizerKind::File {
            self.levels()?;
        }
        self.prior()?;
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!(
                "sigma2 must be nonnegative, got {}",
                self.sigma2
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.quantizer == QuantizerKind::File {
            match &self.quantizer_file {
                Some(p) if p.exists() => {}
                Some(p) => {
                    return Err(Error::Config(format!(
                        "quantizer file {} does not exist",
                        p.display()
                    )))
                }
                None => {
                    return Err(Error::Config(
                        "quantizer = \"file\" needs quantizer_file".into(),
                    ))
                }
            }
        }
        self.rbp_options().validate()?;
        self.design.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeFileConfig {
    pub beta: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub n_levels: usize,
    pub quantizer: QuantizerKind,
    pub quantizer_file: Option<PathBuf>,
    pub t_max: usize,
    pub fp_tol: f64,
    pub design: OptimizerSettings,
}

impl Default for SeFileConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            rho: 0.1,
            sigma2: 1e-5,
            n_levels: 4,
            quantizer: QuantizerKind::Uniform,
            quantizer_file: None,
            t_max: 100,
            fp_tol: 1e-8,
            design: OptimizerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignFileConfig {
    pub rho: f64,
    pub sigma2: f64,
    pub rate_x: f64,
    pub beta_grid: Vec<f64>,
    pub n_levels: Option<usize>,
    pub t_max: usize,
    pub fp_tol: f64,
    pub optimizer: OptimizerSettings,
}

impl Default for DesignFileConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma2: 1e-5,
            rate_x: 1.0,
            beta_grid: vec![1.0, 2.0, 3.0],
            n_levels: None,
            t_max: 200,
            fp_tol: 1e-8,
            optimizer: OptimizerSettings::default(),
        }
    }
}

/// Method/quantizer pairs evaluated by a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combo {
    pub method: Method,
    pub quantizer: QuantizerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub rates: Vec<f64>,
    /// Bits per measurement tried at each rate; β = bits / rate_x.
    pub bits_per_measurement: Vec<u32>,
    pub combos: Vec<Combo>,
    /// Empirical trials per cell; 0 reports predictions only.
    pub trials: usize,
    pub t_max: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub rbp: RbpSection,
    pub design: OptimizerSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            rho: 0.1,
            sigma2: 1e-5,
            rates: vec![1.0, 1.25, 1.5, 1.75, 2.0],
            bits_per_measurement: vec![1, 2, 3],
            combos: vec![
                Combo {
                    method: Method::Rbp,
                    quantizer: QuantizerKind::Uniform,
                },
                Combo {
                    method: Method::Rbp,
                    quantizer: QuantizerKind::Optimal,
                },
                Combo {
                    method: Method::Lmmse,
                    quantizer: QuantizerKind::Uniform,
                },
            ],
            trials: 5,
            t_max: 20,
            seed: 0,
            workers: None,
            rbp: RbpSection::default(),
            design: OptimizerSettings::default(),
        }
    }
}

/// Parses TOML or JSON, chosen by extension (`.json` → JSON, else TOML).
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(
        &text,
        path.extension().and_then(|e| e.to_str()) == Some("json"),
    )
}

pub fn parse<T: DeserializeOwned>(text: &str, json: bool) -> Result<T> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
    }
}

pub fn load_quantizer(path: &Path) -> Result<RegularScalarQuantizer> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid quantizer file {}: {e}", path.display())))
}
