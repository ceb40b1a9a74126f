//! Linear MMSE reconstruction from dequantized measurements.
//!
//! Quantization error is treated as extra white noise whose variance is the
//! centroid quantizer's MSE for a Gaussian input, so the estimator sees
//! `ŷ = A x + w` with `w ~ N(0, σ²_eff I)`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::channel::QuantizedAwgnChannel;
use crate::error::{Error, Result};
use crate::prior::GaussBernoulliPrior;
use crate::quantizer::RegularScalarQuantizer;
use crate::rbp::MeasurementEnsemble;

/// Maps cell indices to cell centroids under `N(0, input_std²)`.
pub fn dequantize(q: &RegularScalarQuantizer, y: &[usize], input_std: f64) -> Result<Vec<f64>> {
    if !(input_std > 0.0 && input_std.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "input standard deviation must be positive, got {input_std}"
        )));
    }
    let table = q.centroids(input_std);
    y.iter()
        .map(|&i| {
            table.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                levels: table.len(),
            })
        })
        .collect()
}

/// Gaussian MSE of centroid reconstruction for `q`, ignoring any stored levels.
pub fn centroid_mse(q: &RegularScalarQuantizer, input_std: f64) -> Result<f64> {
    RegularScalarQuantizer::new(q.boundaries().to_vec())?.gaussian_mse(input_std)
}

#[derive(Debug, Clone)]
pub struct LmmseModel {
    a: DMatrix<f64>,
    tau: f64,
    sigma2_eff: f64,
    // Factor of τAAᵀ + σ²I (m ≤ n) or AᵀA + (σ²/τ)I (m > n).
    factor: Cholesky<f64, nalgebra::Dyn>,
}

impl LmmseModel {
    pub fn new(a: DMatrix<f64>, tau: f64, sigma2_eff: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior variance must be positive, got {tau}"
            )));
        }
        if !(sigma2_eff > 0.0 && sigma2_eff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "effective noise variance must be positive, got {sigma2_eff}"
            )));
        }
        let (m, n) = a.shape();
        let gram = if m <= n {
            let mut g = &a * a.transpose() * tau;
            for i in 0..m {
                g[(i, i)] += sigma2_eff;
            }
            g
        } else {
            let mut g = a.transpose() * &a;
            for i in 0..n {
                g[(i, i)] += sigma2_eff / tau;
            }
            g
        };
        let factor = Cholesky::new(gram)
            .ok_or_else(|| Error::Solver("LMMSE system is not positive definite".into()))?;
        Ok(Self {
            a,
            tau,
            sigma2_eff,
            factor,
        })
    }

    /// Pseudo-noise model for `channel`: `σ²_eff = σ² + centroid MSE` at the
    /// quantizer input spread `√(β·τ + σ²)`.
    pub fn for_channel(
        ensemble: &MeasurementEnsemble,
        prior: &GaussBernoulliPrior,
        channel: &QuantizedAwgnChannel,
    ) -> Result<Self> {
        let tau = prior.variance();
        let input_std = lmmse_input_std(ensemble.beta(), tau, channel.sigma2);
        let sigma2_eff = channel.sigma2 + centroid_mse(&channel.quantizer, input_std)?;
        Self::new(ensemble.matrix().clone(), tau, sigma2_eff)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sigma2_eff(&self) -> f64 {
        self.sigma2_eff
    }

    /// `x̂ = τAᵀ(τAAᵀ + σ²_eff I)⁻¹ ŷ`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.a.shape();
        if y.len() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} measurements, got {}",
                y.len()
            )));
        }
        let y = DVector::from_column_slice(y);
        let x = if m <= n {
            self.a.transpose() * self.factor.solve(&y) * self.tau
        } else {
            self.factor.solve(&(self.a.transpose() * y))
        };
        debug_assert_eq!(x.len(), n);
        Ok(x.iter().copied().collect())
    }
}

pub fn lmmse_input_std(beta: f64, tau: f64, sigma2: f64) -> f64 {
    (beta * tau + sigma2).sqrt()
}

pub fn lmmse_reconstruct(model: &LmmseModel, y_dequantized: &[f64]) -> Result<Vec<f64>> {
    model.reconstruct(y_dequantized)
}

/// Large-system LMMSE error per component: the fixed point of
/// `v = τ(βv + σ²)/(τ + βv + σ²)`.
pub fn lmmse_predicted_mse(beta: f64, tau: f64, sigma2_eff: f64) -> f64 {
    // v solves β v² + (τ + σ² − βτ) v − τσ² = 0; take the positive root.
    let b = tau + sigma2_eff - beta * tau;
    let c = -tau * sigma2_eff;
    let disc = (b * b - 4.0 * beta * c).sqrt();
    if b >= 0.0 {
        2.0 * (-c) / (b + disc)
    } else {
        (-b + disc) / (2.0 * beta)
    }
}
