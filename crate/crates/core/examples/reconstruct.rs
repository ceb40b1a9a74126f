//! Recover a sparse signal from 2-bit quantized random projections with
//! relaxed belief propagation, printing the per-iteration MSE.

use quantcs::channel::QuantizedAwgnChannel;
use quantcs::prior::GaussBernoulliPrior;
use quantcs::quantizer::RegularScalarQuantizer;
use quantcs::rbp::{run, MeasurementEnsemble, RbpOptions};
use quantcs::state_evolution::{se_recursion, SeConfig};

fn main() -> quantcs::error::Result<()> {
    let (n, m, sigma2) = (1000, 500, 1e-5);
    let prior = GaussBernoulliPrior::new(0.1)?;
    let beta = n as f64 / m as f64;
    let q = RegularScalarQuantizer::design_uniform(4, (beta + sigma2).sqrt())?;
    let se = se_recursion(&SeConfig::new(beta, sigma2, prior, q.clone())?)?;
    let ch = QuantizedAwgnChannel::new(q, sigma2)?;

    let x = prior.sample_signal(n, 1);
    let ens = MeasurementEnsemble::generate(m, n, 2)?;
    let y = ch.measure(&ens.apply(&x), 3)?;

    let out = run(&ens, &ch, &prior, &y, &RbpOptions::default(), Some(&x))?;
    for (t, v) in out.mse_trace.unwrap_or_default().iter().enumerate() {
        println!("t = {t:>2}: {:>7.2} dB", 10.0 * v.log10());
    }
    println!("state evolution predicts {:.2} dB", se.fixed_point_db());
    Ok(())
}
