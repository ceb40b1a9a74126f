//! Predicted MSE against rate for RBP with uniform and designed quantizers
//! and for the linear baseline. Writes CSV to stdout.

use quantcs::harness::config::SweepConfig;
use quantcs::harness::sweep::emit_rate_sweep;

fn main() -> quantcs::error::Result<()> {
    let cfg = SweepConfig {
        rates: vec![1.0, 1.5, 2.0],
        bits_per_measurement: vec![1, 2],
        trials: 0,
        ..Default::default()
    };
    let out = emit_rate_sweep(&cfg)?;
    print!("{}", out.to_csv());
    Ok(())
}
