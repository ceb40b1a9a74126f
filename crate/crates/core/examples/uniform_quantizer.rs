//! MSE-optimal uniform quantizers for a unit Gaussian, and cell lookup.

use quantcs::quantizer::RegularScalarQuantizer;

fn main() -> quantcs::error::Result<()> {
    for n in [2, 4, 8, 16] {
        let q = RegularScalarQuantizer::design_uniform(n, 1.0)?;
        let step = if n > 2 {
            q.boundaries()[1] - q.boundaries()[0]
        } else {
            f64::NAN
        };
        println!(
            "N = {n:>2}: step {step:.4}, MSE {:.5} ({:.2} dB)",
            q.gaussian_mse(1.0)?,
            10.0 * q.gaussian_mse(1.0)?.log10()
        );
    }
    let q = RegularScalarQuantizer::design_uniform(4, 1.0)?;
    for s in [-1.7, -0.2, 0.0, 0.9, 2.5] {
        let i = q.quantize(s)?;
        let (lo, hi) = q.cell_bounds(i)?;
        println!("s = {s:>5}: cell {i} = [{lo:.3}, {hi:.3})");
    }
    Ok(())
}
