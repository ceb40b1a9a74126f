//! Optimize quantizer boundaries for the state-evolution fixed point at
//! one bit per signal component, across measurement ratios.

use quantcs::designer::{sweep_beta, DesignProblem};
use quantcs::prior::GaussBernoulliPrior;

fn main() -> quantcs::error::Result<()> {
    // β = 3 (eight levels) is slow; pass `full` to include it
    let full = std::env::args().any(|a| a == "full");
    let grid = if full {
        vec![1.0, 2.0, 3.0]
    } else {
        vec![1.0, 2.0]
    };
    let problem = DesignProblem::new(1.0, grid, GaussBernoulliPrior::new(0.1)?, 1e-5);
    let result = sweep_beta(&problem)?;
    for e in &result.table {
        let b: Vec<String> = e.boundaries.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "beta {} N {}: designed {:.2} dB, uniform {:.2} dB, boundaries [{}]",
            e.beta,
            e.n_levels,
            e.fixed_point_db,
            e.uniform_fixed_point_db,
            b.join(", ")
        );
    }
    println!(
        "best beta {} at {:.2} dB",
        result.best_beta, result.predicted_mse_db
    );
    Ok(())
}
