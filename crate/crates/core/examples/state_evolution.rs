//! State-evolution trajectory for uniform quantizers of increasing
//! resolution at a fixed measurement ratio.

use quantcs::prior::GaussBernoulliPrior;
use quantcs::quantizer::RegularScalarQuantizer;
use quantcs::state_evolution::{se_recursion, to_db, SeConfig};

fn main() -> quantcs::error::Result<()> {
    let (beta, sigma2): (f64, f64) = (2.0, 1e-5);
    let prior = GaussBernoulliPrior::new(0.1)?;
    for n_levels in [2, 4, 8] {
        let q = RegularScalarQuantizer::design_uniform(n_levels, (beta + sigma2).sqrt())?;
        let trace = se_recursion(&SeConfig::new(beta, sigma2, prior, q)?)?;
        let head: Vec<String> = trace
            .values
            .iter()
            .take(6)
            .map(|t| format!("{:.2}", to_db(*t)))
            .collect();
        println!(
            "N = {n_levels}: {} ... fixed point {:.2} dB after {} steps",
            head.join(" "),
            trace.fixed_point_db(),
            trace.values.len() - 1
        );
    }
    Ok(())
}
