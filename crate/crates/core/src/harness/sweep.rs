//! Rate sweep: predicted and empirical MSE per (rate, method, quantizer).

use serde::{Deserialize, Serialize};

use super::config::{Combo, ExperimentConfig, Method, QuantizerKind, Resolved, SweepConfig};
use super::experiment::{input_std, run_resolved, ErrorRecord};
use crate::baselines::{centroid_mse, lmmse_predicted_mse};
use crate::designer::optimize_boundaries;
use crate::error::{Error, Result};
use crate::prior::GaussBernoulliPrior;
use crate::quantizer::RegularScalarQuantizer;
use crate::state_evolution::{to_db, SeConfig, StateEvolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub rate_x: f64,
    pub method: Method,
    pub quantizer_kind: QuantizerKind,
    pub beta: Option<f64>,
    pub n_levels: Option<usize>,
    pub mse_db_predicted: Option<f64>,
    pub mse_db_empirical: Option<f64>,
    /// The prediction failed; the cell is left out of the CSV.
    pub error: Option<ErrorRecord>,
    /// The simulation failed; the CSV row keeps an empty empirical value.
    pub empirical_error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub cells: Vec<SweepCell>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SweepOutput {
    /// One row per cell that produced a prediction; empirical values left
    /// empty when not run.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("rate_x,method,quantizer_kind,beta,mse_db_predicted,mse_db_empirical\n");
        for c in self.cells.iter().filter(|c| c.error.is_none()) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.rate_x,
                c.method.name(),
                c.quantizer_kind.name(),
                c.beta.map(|b| format!("{b:.6}")).unwrap_or_default(),
                fmt_opt(c.mse_db_predicted),
                fmt_opt(c.mse_db_empirical),
            ));
        }
        out
    }
}

/// Python/matplotlib script that draws MSE (dB) against rate from the CSV.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        r#"import csv
import collections
import matplotlib.pyplot as plt

series = collections.defaultdict(lambda: ([], [], []))
with open("{csv_name}") as f:
    for row in csv.DictReader(f):
        key = row["method"] + " / " + row["quantizer_kind"]
        r, p, e = series[key]
        r.append(float(row["rate_x"]))
        p.append(float(row["mse_db_predicted"]) if row["mse_db_predicted"] else float("nan"))
        e.append(float(row["mse_db_empirical"]) if row["mse_db_empirical"] else float("nan"))

fig, ax = plt.subplots(figsize=(6, 4.5))
for key, (r, p, e) in sorted(series.items()):
    line, = ax.plot(r, p, "-", label=key + " (predicted)")
    ax.plot(r, e, "o", color=line.get_color(), label=key + " (simulated)")
ax.set_xlabel("rate (bits / component)")
ax.set_ylabel("MSE (dB)")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("rate_sweep.pdf")
"#
    )
}

struct Candidate {
    beta: f64,
    n_levels: usize,
    quantizer: RegularScalarQuantizer,
    predicted: f64,
}

fn predict(
    method: Method,
    beta: f64,
    prior: &GaussBernoulliPrior,
    sigma2: f64,
    q: &RegularScalarQuantizer,
) -> Result<f64> {
    match method {
        Method::Rbp => {
            let mut c = SeConfig::new(beta, sigma2, *prior, q.clone())?;
            c.t_max = 500;
            Ok(StateEvolution::default().recursion(&c)?.fixed_point)
        }
        Method::Lmmse => {
            let s2 = sigma2 + centroid_mse(q, input_std(beta, prior, sigma2))?;
            Ok(lmmse_predicted_mse(beta, prior.variance(), s2))
        }
    }
}

fn best_candidate(
    cfg: &SweepConfig,
    rate: f64,
    combo: Combo,
    designs: &mut [Option<RegularScalarQuantizer>],
) -> Result<Candidate> {
    let prior = GaussBernoulliPrior::new(cfg.rho)?;
    let mut best: Option<Candidate> = None;
    for (slot, &bits) in cfg.bits_per_measurement.iter().enumerate() {
        let beta = bits as f64 / rate;
        let n_levels = 1usize << bits;
        let uniform =
            RegularScalarQuantizer::design_uniform(n_levels, input_std(beta, &prior, cfg.sigma2))?;
        let q = match combo.quantizer {
            QuantizerKind::Uniform => uniform,
            QuantizerKind::Optimal => {
                if designs[slot].is_none() {
                    let mut c = SeConfig::new(beta, cfg.sigma2, prior, uniform)?;
                    c.t_max = 200;
                    designs[slot] = Some(optimize_boundaries(n_levels, &c, &cfg.design)?.quantizer);
                }
                designs[slot].clone().expect("just designed")
            }
            QuantizerKind::File => {
                return Err(Error::Config("file quantizers are not swept".into()));
            }
        };
        let predicted = predict(combo.method, beta, &prior, cfg.sigma2, &q)?;
        if best.as_ref().is_none_or(|b| predicted < b.predicted) {
            best = Some(Candidate {
                beta,
                n_levels,
                quantizer: q,
                predicted,
            });
        }
    }
    best.ok_or_else(|| Error::Config("bits_per_measurement is empty".into()))
}

fn validate(cfg: &SweepConfig) -> Result<()> {
    if cfg.rates.is_empty() || cfg.rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config(format!(
            "rates must be positive, got {:?}",
            cfg.rates
        )));
    }
    if cfg.bits_per_measurement.is_empty()
        || cfg.bits_per_measurement.iter().any(|&b| b == 0 || b > 16)
    {
        return Err(Error::Config(format!(
            "bits_per_measurement must lie in 1..=16, got {:?}",
            cfg.bits_per_measurement
        )));
    }
    if cfg.combos.is_empty() {
        return Err(Error::Config("combos is empty".into()));
    }
    if cfg.n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    GaussBernoulliPrior::new(cfg.rho)?;
    Ok(())
}

/// Predicted (and, with `trials > 0`, simulated) MSE for every rate and
/// method/quantizer combination, each at its best β.
pub fn emit_rate_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    validate(cfg)?;
    let mut cells = Vec::new();
    for &rate in &cfg.rates {
        let mut designs = vec![None; cfg.bits_per_measurement.len()];
        for (ci, &combo) in cfg.combos.iter().enumerate() {
            let mut cell = SweepCell {
                rate_x: rate,
                method: combo.method,
                quantizer_kind: combo.quantizer,
                beta: None,
                n_levels: None,
                mse_db_predicted: None,
                mse_db_empirical: None,
                error: None,
                empirical_error: None,
            };
            match best_candidate(cfg, rate, combo, &mut designs) {
                Err(e) => cell.error = Some((&e).into()),
                Ok(c) => {
                    cell.beta = Some(c.beta);
                    cell.n_levels = Some(c.n_levels);
                    cell.mse_db_predicted = Some(to_db(c.predicted));
                    if cfg.trials > 0 {
                        match simulate(cfg, rate, ci, combo, &c) {
                            Ok(v) => cell.mse_db_empirical = v,
                            Err(e) => cell.empirical_error = Some((&e).into()),
                        }
                    }
                }
            }
            cells.push(cell);
        }
    }
    Ok(SweepOutput { cells })
}

fn simulate(
    cfg: &SweepConfig,
    rate: f64,
    combo_index: usize,
    combo: Combo,
    c: &Candidate,
) -> Result<Option<f64>> {
    let m = ((cfg.n as f64 / c.beta).round() as usize).max(1);
    let exp = ExperimentConfig {
        n: cfg.n,
        beta: None,
        m: Some(m),
        rho: cfg.rho,
        sigma2: cfg.sigma2,
        rate_x: Some(rate),
        n_levels: Some(c.n_levels),
        quantizer: combo.quantizer,
        quantizer_file: None,
        method: combo.method,
        trials: cfg.trials,
        t_max: cfg.t_max,
        // Distinct but reproducible streams per cell.
        seed: cfg
            .seed
            .wrapping_add((rate * 1000.0).round() as u64 * 97)
            .wrapping_add(combo_index as u64),
        workers: cfg.workers,
        rbp: cfg.rbp.clone(),
        design: cfg.design.clone(),
    };
    let resolved = Resolved {
        n: cfg.n,
        m,
        beta: cfg.n as f64 / m as f64,
        n_levels: c.n_levels,
        quantizer: c.quantizer.clone(),
    };
    let report = run_resolved(&exp, resolved)?;
    Ok(report.summary.median_mse_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_only_sweep_has_one_row_per_cell() {
        let cfg = SweepConfig {
            rates: vec![1.0, 2.0],
            bits_per_measurement: vec![1, 2],
            combos: vec![
                Combo {
                    method: Method::Rbp,
                    quantizer: QuantizerKind::Uniform,
                },
                Combo {
                    method: Method::Lmmse,
                    quantizer: QuantizerKind::Uniform,
                },
                Combo {
                    method: Method::Rbp,
                    quantizer: QuantizerKind::File,
                },
            ],
            trials: 0,
            ..Default::default()
        };
        let out = emit_rate_sweep(&cfg).unwrap();
        assert_eq!(out.cells.len(), 6);
        let csv = out.to_csv();
        // file cells fail and are left out of the CSV
        assert_eq!(csv.lines().count(), 1 + 4);
        for c in out.cells.iter().filter(|c| c.error.is_none()) {
            assert!(c.mse_db_empirical.is_none());
        }
        for rate in [1.0, 2.0] {
            let get = |m: Method| {
                out.cells
                    .iter()
                    .find(|c| {
                        c.rate_x == rate
                            && c.method == m
                            && c.quantizer_kind == QuantizerKind::Uniform
                    })
                    .unwrap()
                    .mse_db_predicted
                    .unwrap()
            };
            assert!(get(Method::Rbp) < get(Method::Lmmse));
        }
        assert!(plot_script("sweep.csv").contains("sweep.csv"));
    }
}
