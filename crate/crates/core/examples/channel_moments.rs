//! Posterior moments and score functions of the quantized Gaussian channel
//! as the prediction moves across a cell.

use quantcs::channel::QuantizedAwgnChannel;
use quantcs::quantizer::RegularScalarQuantizer;

fn main() -> quantcs::error::Result<()> {
    let q = RegularScalarQuantizer::new(vec![-1.0, 0.0, 1.0])?;
    let ch = QuantizedAwgnChannel::new(q, 0.01)?;
    let (y, nu) = (2, 0.25);
    println!("cell {y} = {:?}, nu = {nu}", ch.quantizer.cell_bounds(y)?);
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9}",
        "zhat", "E[z|y]", "var", "d1", "d2"
    );
    for zhat in [-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 6.0] {
        let m = ch.output_moments(y, zhat, nu)?;
        let s = ch.scores(y, zhat, nu)?;
        println!(
            "{zhat:>6.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            m.mean, m.var, s.d1, s.d2
        );
    }
    Ok(())
}
