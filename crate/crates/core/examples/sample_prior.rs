//! Draw a sparse Gauss–Bernoulli signal and evaluate the scalar posterior
//! denoiser on a few noisy observations.

use quantcs::prior::GaussBernoulliPrior;

fn main() -> quantcs::error::Result<()> {
    let prior = GaussBernoulliPrior::new(0.1)?;
    let x = prior.sample_signal(100_000, 7);
    let nonzero = x.iter().filter(|v| **v != 0.0).count() as f64 / x.len() as f64;
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    println!(
        "rho = {}, nonzero fraction {nonzero:.4}, power {power:.4}",
        prior.rho()
    );

    let nu = 0.1;
    println!("{:>6} {:>10} {:>10}", "q", "mean", "var");
    for q in [-2.0, -0.5, 0.0, 0.3, 1.0, 3.0] {
        let p = prior.posterior(q, nu)?;
        println!("{q:>6.2} {:>10.5} {:>10.5}", p.mean, p.var);
    }
    Ok(())
}
