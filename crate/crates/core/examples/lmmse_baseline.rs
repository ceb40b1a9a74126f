//! Linear MMSE reconstruction from centroid-dequantized measurements,
//! against its large-system prediction.

use quantcs::baselines::{dequantize, lmmse_input_std, lmmse_predicted_mse, LmmseModel};
use quantcs::channel::QuantizedAwgnChannel;
use quantcs::prior::GaussBernoulliPrior;
use quantcs::quantizer::RegularScalarQuantizer;
use quantcs::rbp::{mse, MeasurementEnsemble};

fn main() -> quantcs::error::Result<()> {
    let (n, m, sigma2) = (800, 400, 1e-5);
    let prior = GaussBernoulliPrior::new(0.1)?;
    let ens = MeasurementEnsemble::generate(m, n, 11)?;
    let spread = lmmse_input_std(ens.beta(), prior.variance(), sigma2);
    let ch = QuantizedAwgnChannel::new(RegularScalarQuantizer::design_uniform(4, spread)?, sigma2)?;

    let x = prior.sample_signal(n, 12);
    let y = ch.measure(&ens.apply(&x), 13)?;
    let model = LmmseModel::for_channel(&ens, &prior, &ch)?;
    let xhat = model.reconstruct(&dequantize(&ch.quantizer, &y, spread)?)?;

    let predicted = lmmse_predicted_mse(ens.beta(), model.tau(), model.sigma2_eff());
    println!("effective noise {:.4e}", model.sigma2_eff());
    println!(
        "empirical {:.2} dB, predicted {:.2} dB",
        10.0 * mse(&x, &xhat).log10(),
        10.0 * predicted.log10()
    );
    Ok(())
}
