//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the closed forms under test: moments come from plain
//! composite Simpson integration, averages from Monte Carlo, and message
//! passing from explicit leave-one-out loops.
#![allow(dead_code)]

use quantcs::channel::QuantizedAwgnChannel;
use quantcs::prior::GaussBernoulliPrior;
use quantcs::quantizer::RegularScalarQuantizer;
use quantcs::rbp::{MeasurementEnsemble, RbpState, VARIANCE_CEILING_SLACK, VARIANCE_FLOOR};
use quantcs::state_evolution::SeConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

const PANELS: usize = 40_000;

/// Posterior mean and variance of `x` given `q = x + v`, `v ~ N(0, nu)`,
/// for a Gauss–Bernoulli prior, by direct integration.
pub fn posterior_oracle(rho: f64, s2: f64, q: f64, nu: f64) -> (f64, f64) {
    let ln_gauss =
        |t: f64, var: f64| -0.5 * t * t / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    // Continuous part ρ·N(x; 0, s²)·N(q − x; 0, ν) is concentrated around
    // c with width w; integrate ±14 widths around it.
    let c = q * s2 / (s2 + nu);
    let w = (s2 * nu / (s2 + nu)).sqrt();
    let ln_cont = |x: f64| rho.ln() + ln_gauss(x, s2) + ln_gauss(q - x, nu);
    let ln_zero = if rho < 1.0 {
        (1.0 - rho).ln() + ln_gauss(q, nu)
    } else {
        f64::NEG_INFINITY
    };
    let shift = ln_cont(c).max(ln_zero);
    let (lo, hi) = (c - 14.0 * w, c + 14.0 * w);
    let mass0 = (ln_zero - shift).exp();
    let dens = |x: f64| (ln_cont(x) - shift).exp();
    let i0 = simpson(dens, lo, hi, PANELS);
    let i1 = simpson(|x| x * dens(x), lo, hi, PANELS);
    let z = mass0 + i0;
    let mean = i1 / z;
    let second = simpson(|x| (x - mean) * (x - mean) * dens(x), lo, hi, PANELS);
    let var = (second + mass0 * mean * mean) / z;
    (mean, var)
}

/// Standardized truncated-normal mean and variance on `(a, b)`, by direct
/// integration, along with the log mass.
pub fn truncated_oracle(a: f64, b: f64) -> (f64, f64, f64) {
    // density peak within the interval
    let c = 0.0f64.clamp(a, b);
    let lo = a.max(c - 40.0);
    let hi = b.min(c + 40.0);
    let f = |t: f64| (-0.5 * (t - c) * (t + c)).exp();
    let z = simpson(f, lo, hi, PANELS);
    let mean = simpson(|t| t * f(t), lo, hi, PANELS) / z;
    let var = simpson(|t| (t - mean) * (t - mean) * f(t), lo, hi, PANELS) / z;
    let ln_mass = z.ln() - 0.5 * c * c - 0.5 * (2.0 * std::f64::consts::PI).ln();
    (mean, var, ln_mass)
}

/// F_out, E_out, D1, D2 for `N(zhat, nu)` restricted to `(lo, hi)`.
pub fn output_oracle(lo: f64, hi: f64, zhat: f64, nu: f64) -> [f64; 4] {
    let sd = nu.sqrt();
    let (m, v, _) = truncated_oracle((lo - zhat) / sd, (hi - zhat) / sd);
    [zhat + sd * m, nu * v, -m / sd, (1.0 - v) / nu]
}

/// Index of the cell containing `s` by scanning boundaries in order.
pub fn linear_scan(boundaries: &[f64], s: f64) -> usize {
    let mut i = 0;
    for &b in boundaries {
        if s >= b {
            i += 1;
        } else {
            break;
        }
    }
    i
}

/// Lloyd–Max iteration for `N(0, 1)` from a uniform start; returns
/// `(boundaries, levels, mse)`.
pub fn lloyd(n_levels: usize, iters: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut levels: Vec<f64> = (0..n_levels)
        .map(|k| (k as f64 - (n_levels as f64 - 1.0) / 2.0) * 4.0 / n_levels as f64)
        .collect();
    let mut boundaries = Vec::new();
    for _ in 0..iters {
        boundaries = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        levels = (0..n_levels)
            .map(|i| {
                let a = if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    boundaries[i - 1]
                };
                let b = if i + 1 == n_levels {
                    f64::INFINITY
                } else {
                    boundaries[i]
                };
                truncated_oracle(a, b).0
            })
            .collect();
    }
    let mse = (0..n_levels)
        .map(|i| {
            let a = if i == 0 {
                f64::NEG_INFINITY
            } else {
                boundaries[i - 1]
            };
            let b = if i + 1 == n_levels {
                f64::INFINITY
            } else {
                boundaries[i]
            };
            let (m, v, ln_mass) = truncated_oracle(a, b);
            ln_mass.exp() * (v + (m - levels[i]).powi(2))
        })
        .sum();
    (boundaries, levels, mse)
}

/// Sample mean and standard error.
pub fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

/// Monte Carlo estimate of `E_q[E_in(q, ν)]`.
pub fn ein_bar_mc(prior: &GaussBernoulliPrior, nu: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = prior.sample_with(draws, &mut rng);
    let sd = nu.sqrt();
    mean_and_se(x.into_iter().map(|xi| {
        let v: f64 = rng.sample(StandardNormal);
        prior.input_var(xi + sd * v, nu).unwrap()
    }))
}

/// Monte Carlo estimate of `E[D2(y, ẑ, ν + σ²)]` drawing `(ẑ, w, η)` jointly.
pub fn expected_d2_mc(config: &SeConfig, nu: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = QuantizedAwgnChannel::new(config.quantizer.clone(), config.sigma2).unwrap();
    let zhat_sd = (config.beta * config.prior.variance() - nu).max(0.0).sqrt();
    let (w_sd, eta_sd) = (nu.sqrt(), config.sigma2.sqrt());
    let total = nu + config.sigma2;
    mean_and_se((0..draws).map(|_| {
        let zhat = zhat_sd * rng.sample::<f64, _>(StandardNormal);
        let s = zhat
            + w_sd * rng.sample::<f64, _>(StandardNormal)
            + eta_sd * rng.sample::<f64, _>(StandardNormal);
        let y = ch.quantizer.quantize(s).unwrap();
        ch.d2(y, zhat, total).unwrap()
    }))
}

/// Per-edge messages after one round, recomputed with explicit
/// leave-one-out sums. Returns `(u, τ_out, x̂, τ̂)` as `[a][i]` arrays.
#[allow(clippy::type_complexity)]
pub fn brute_force_round(
    state: &RbpState,
    ens: &MeasurementEnsemble,
    ch: &QuantizedAwgnChannel,
    prior: &GaussBernoulliPrior,
    y: &[usize],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (m, n) = (ens.m(), ens.n());
    let a = ens.matrix();
    let mut u = vec![vec![0.0; n]; m];
    let mut tout = vec![vec![0.0; n]; m];
    for r in 0..m {
        for i in 0..n {
            let mut zhat = 0.0;
            let mut nu = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                zhat += a[(r, j)] * state.xhat_edges[(r, j)];
                nu += a[(r, j)] * a[(r, j)] * state.tau_edges[(r, j)];
            }
            let nu = (nu + ch.sigma2).max(VARIANCE_FLOOR);
            u[r][i] = -ch.d1(y[r], zhat, nu).unwrap();
            tout[r][i] = ch.d2(y[r], zhat, nu).unwrap().max(VARIANCE_FLOOR);
        }
    }
    let ceiling = prior.variance() * (1.0 + VARIANCE_CEILING_SLACK);
    let mut xhat = vec![vec![0.0; n]; m];
    let mut tau = vec![vec![0.0; n]; m];
    for r in 0..m {
        for i in 0..n {
            let mut num = 0.0;
            let mut den = 0.0;
            for b in (0..m).filter(|&b| b != r) {
                num += a[(b, i)] * u[b][i];
                den += a[(b, i)] * a[(b, i)] * tout[b][i];
            }
            let den = den.max(VARIANCE_FLOOR);
            let post = prior.posterior(num / den, 1.0 / den).unwrap();
            xhat[r][i] = post.mean;
            tau[r][i] = post.var.clamp(VARIANCE_FLOOR, ceiling);
        }
    }
    (u, tout, xhat, tau)
}

/// Signal estimate from full sums over the given measurement messages.
pub fn brute_force_estimate(
    u: &[Vec<f64>],
    tout: &[Vec<f64>],
    ens: &MeasurementEnsemble,
    prior: &GaussBernoulliPrior,
) -> Vec<f64> {
    let a = ens.matrix();
    (0..ens.n())
        .map(|i| {
            let num: f64 = (0..ens.m()).map(|b| a[(b, i)] * u[b][i]).sum();
            let den: f64 = (0..ens.m())
                .map(|b| a[(b, i)] * a[(b, i)] * tout[b][i])
                .sum();
            prior.input_mean(num / den, 1.0 / den).unwrap()
        })
        .collect()
}

/// `a` agrees with `b` to `rel` relative, with an absolute floor `scale·rel`.
pub fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(scale)
}

pub fn sparse_prior() -> GaussBernoulliPrior {
    GaussBernoulliPrior::new(0.1).unwrap()
}

pub fn uniform_for(n_levels: usize, beta: f64, sigma2: f64) -> RegularScalarQuantizer {
    RegularScalarQuantizer::design_uniform(n_levels, (beta + sigma2).sqrt()).unwrap()
}

/// A random SE configuration: β, σ², ρ and a jittered quantizer with
/// 2–8 levels.
pub fn random_se_config(rng: &mut ChaCha8Rng) -> SeConfig {
    let beta = rng.random_range(0.5..3.0);
    let sigma2 = 10f64.powf(rng.random_range(-6.0..-1.0));
    let rho = rng.random_range(0.05..1.0);
    let n_levels = rng.random_range(2..=8usize);
    let prior = GaussBernoulliPrior::new(rho).unwrap();
    let sd = (beta + sigma2).sqrt();
    let base = RegularScalarQuantizer::design_uniform(n_levels, sd).unwrap();
    let mut b: Vec<f64> = base.boundaries().to_vec();
    let step = if b.len() > 1 { b[1] - b[0] } else { sd };
    for v in b.iter_mut() {
        *v += rng.random_range(-0.2..0.2) * step;
    }
    let q = RegularScalarQuantizer::new(b).unwrap();
    SeConfig::new(beta, sigma2, prior, q).unwrap()
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// F_in/E_in against [`posterior_oracle`] on random points; returns the
/// worst relative error.
pub fn check_input_oracle(points: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let rho = rng.random_range(0.02..1.0);
        let q = rng.random_range(-6.0..6.0);
        let nu = rng.random_range(-4.0f64..2.5).exp();
        let p = GaussBernoulliPrior::new(rho).unwrap();
        let got = p.posterior(q, nu).unwrap();
        let (mean, var) = posterior_oracle(rho, 1.0 / rho, q, nu);
        // F_in is odd, so near q = 0 compare against the prior scale instead
        let e = ((got.mean - mean).abs() / mean.abs().max(1e-8)).max(rel_err(got.var, var));
        worst = worst.max(e);
        if e > 1e-8 {
            return Err(format!("rho={rho} q={q} nu={nu}: relative error {e:e}"));
        }
    }
    Ok(worst)
}

/// F_out/E_out/D1/D2 against [`output_oracle`] on random non-saturated
/// points, plus finiteness at 12σ outside bounded cells.
pub fn check_output_oracle(points: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < points {
        let k = rng.random_range(1..8usize);
        let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-2);
        let ch = QuantizedAwgnChannel::new(RegularScalarQuantizer::new(b).unwrap(), 0.1).unwrap();
        let y = rng.random_range(0..ch.num_levels());
        let zhat = rng.random_range(-5.0..5.0);
        let nu: f64 = rng.random_range(-4.0f64..2.0).exp();
        let (lo, hi) = ch.quantizer.cell_bounds(y).unwrap();
        let sd = nu.sqrt();
        let dist = ((lo - zhat) / sd).max((zhat - hi) / sd);
        if dist >= 8.0 {
            continue;
        }
        done += 1;
        let want = output_oracle(lo, hi, zhat, nu);
        let m = ch.output_moments(y, zhat, nu).unwrap();
        let s = ch.scores(y, zhat, nu).unwrap();
        let got = [m.mean, m.var, s.d1, s.d2];
        for k in 0..4 {
            // F_out and D1 cross zero; measure those against a small floor
            let scale = want[k].abs().max(if k == 0 { 1e-3 } else { 1e-6 / nu });
            let e = (got[k] - want[k]).abs() / scale;
            worst = worst.max(e);
            if e > 1e-7 {
                return Err(format!(
                    "cell ({lo}, {hi}) zhat={zhat} nu={nu} output {k}: {} vs {} ({e:e})",
                    got[k], want[k]
                ));
            }
        }
        if lo.is_finite() && hi.is_finite() {
            for z in [lo - 12.0 * sd, hi + 12.0 * sd] {
                let m = ch.output_moments(y, z, nu).unwrap();
                let s = ch.scores(y, z, nu).unwrap();
                let finite = [m.mean, m.var, s.d1, s.d2].iter().all(|v| v.is_finite());
                if !finite || m.mean < lo || m.mean > hi || m.var <= 0.0 || m.var > nu {
                    return Err(format!(
                        "tail point zhat={z} in cell ({lo}, {hi}) gave {m:?} {s:?}"
                    ));
                }
            }
        }
    }
    Ok(worst)
}

/// `1/Ē_out` against a joint Monte Carlo over `(ẑ, w, η)` on random configs;
/// returns the largest deviation in standard errors.
pub fn check_eout_monte_carlo(configs: usize, draws: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let se = quantcs::state_evolution::StateEvolution::default();
    let mut worst: f64 = 0.0;
    for c in 0..configs {
        let config = random_se_config(&mut rng);
        let nu = config.beta * config.prior.variance() * rng.random_range(0.02..0.98);
        let eout = se.eout_bar(&config, nu).map_err(|e| e.to_string())?;
        let (mc, stderr) = expected_d2_mc(&config, nu, draws, seed + 1 + c as u64);
        let z = (1.0 / eout.value - mc).abs() / stderr;
        worst = worst.max(z);
        if z > 4.0 {
            return Err(format!(
                "config {c} (beta={}, nu={nu}): quadrature {} vs MC {mc} ± {stderr}",
                config.beta,
                1.0 / eout.value
            ));
        }
    }
    Ok(worst)
}

/// Library RBP rounds against [`brute_force_round`] on a 5×8 instance;
/// returns the largest absolute difference.
pub fn check_rbp_brute_force(rounds: usize) -> Result<f64, String> {
    use quantcs::rbp::{estimate, iterate};
    let prior = GaussBernoulliPrior::new(0.4).unwrap();
    let x = prior.sample_signal(8, 3);
    let ens = MeasurementEnsemble::generate(5, 8, 4).unwrap();
    let ch = QuantizedAwgnChannel::new(uniform_for(4, 1.6, 0.01), 0.01).unwrap();
    let y = ch.measure(&ens.apply(&x), 5).unwrap();
    let mut state = RbpState::init(&ens, &prior);
    let mut worst: f64 = 0.0;
    for round in 0..rounds {
        let before = state.clone();
        iterate(&mut state, &ens, &ch, &prior, &y).map_err(|e| e.to_string())?;
        let (u, tout, xhat, tau) = brute_force_round(&before, &ens, &ch, &prior, &y);
        let est = estimate(&state, &ens, &prior).map_err(|e| e.to_string())?;
        let want = brute_force_estimate(&u, &tout, &ens, &prior);
        for r in 0..5 {
            for i in 0..8 {
                for d in [
                    state.u_edges[(r, i)] - u[r][i],
                    state.tauout_edges[(r, i)] - tout[r][i],
                    state.xhat_edges[(r, i)] - xhat[r][i],
                    state.tau_edges[(r, i)] - tau[r][i],
                ] {
                    worst = worst.max(d.abs());
                }
            }
        }
        for (a, b) in est.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        if worst > 1e-12 {
            return Err(format!("round {round}: difference {worst:e}"));
        }
    }
    Ok(worst)
}

/// Monotone traces, stable fixed points and the fine-quantizer limit.
pub fn check_se_structure(configs: usize, seed: u64) -> Result<String, String> {
    let se = quantcs::state_evolution::StateEvolution::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_rise: f64 = 0.0;
    for c in 0..configs {
        let config = random_se_config(&mut rng);
        let tr = se.recursion(&config).map_err(|e| e.to_string())?;
        let tau = config.prior.variance();
        for w in tr.values.windows(2) {
            if !(w[1] > 0.0 && w[1] <= tau) {
                return Err(format!("config {c}: value {} outside (0, τ]", w[1]));
            }
            let rise = (w[1] - w[0]) / w[0];
            worst_rise = worst_rise.max(rise);
            if rise > 1e-9 {
                return Err(format!("config {c}: trace rose by {rise:e} relative"));
            }
        }
        if !tr.converged {
            return Err(format!(
                "config {c}: no fixed point within {} steps",
                config.t_max
            ));
        }
        let again = se
            .recursion_from(&config, tr.fixed_point)
            .map_err(|e| e.to_string())?;
        let drift = (again.fixed_point - tr.fixed_point).abs() / tr.fixed_point;
        if drift >= config.fp_tol {
            return Err(format!(
                "config {c}: restart at the fixed point moved it by {drift:e}"
            ));
        }
    }
    let (beta, sigma2): (f64, f64) = (2.0, 1e-3);
    let sd = (beta + sigma2).sqrt();
    let q = RegularScalarQuantizer::new(
        (1..1024)
            .map(|k| -6.0 * sd + 12.0 * sd * k as f64 / 1024.0)
            .collect(),
    )
    .unwrap();
    let fine = SeConfig::new(beta, sigma2, GaussBernoulliPrior::new(0.1).unwrap(), q).unwrap();
    let mut worst_fine: f64 = 0.0;
    for nu in [0.05, 0.2, 0.5, 1.0, 1.9] {
        let e = se.eout_bar(&fine, nu).map_err(|e| e.to_string())?.value;
        let dev = rel_err(e, nu + sigma2);
        worst_fine = worst_fine.max(dev);
        if dev > 0.02 {
            return Err(format!("fine quantizer at nu={nu}: {e} vs {}", nu + sigma2));
        }
    }
    Ok(format!(
        "largest relative rise {worst_rise:.1e}, fine-quantizer deviation {:.2}%",
        100.0 * worst_fine
    ))
}

/// The miniature experiment behind the golden report.
pub fn golden_config() -> quantcs::harness::config::ExperimentConfig {
    quantcs::harness::config::ExperimentConfig {
        n: 40,
        beta: Some(2.0),
        trials: 3,
        t_max: 5,
        seed: 2024,
        ..Default::default()
    }
}

pub fn golden_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tiny_report.json")
}

/// Compares `report` with the stored golden file, rewriting it instead when
/// `UPDATE_GOLDEN` is set.
pub fn check_golden(report: &str) -> Result<(), String> {
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, report).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let stored = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (set UPDATE_GOLDEN=1 to create it)", path.display()))?;
    if stored == report {
        Ok(())
    } else {
        let line = stored
            .lines()
            .zip(report.lines())
            .position(|(a, b)| a != b)
            .map_or(stored.lines().count().min(report.lines().count()), |i| {
                i + 1
            });
        Err(format!(
            "report differs from {} at line {line}",
            path.display()
        ))
    }
}
