//! Small differentiable models used as victims and surrogates for
//! gradient-based attacks.

mod linear;
mod mlp;

pub use linear::LinearModel;
pub(crate) use mlp::argmax;
pub use mlp::{mlp_train, Layer, MlpModel, TrainConfig};

use crate::classifiers::Classifier;
use crate::error::{check_dim, Result};

/// A classifier with logits `Z(x)` and exact input gradients.
pub trait DifferentiableModel: Classifier {
    /// Unnormalized class scores; the input must have dimension `dim()`.
    fn logits(&self, x: &[f64]) -> Vec<f64>;

    /// `d/dx (upstream . Z(x))`.
    fn logit_vjp(&self, x: &[f64], upstream: &[f64]) -> Vec<f64>;

    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Cross-entropy `-log softmax(Z(x))_y`.
    fn loss(&self, x: &[f64], y: usize) -> f64 {
        let z = self.logits(x);
        log_sum_exp(&z) - z[y]
    }

    /// Gradient of [`DifferentiableModel::loss`] with respect to the input.
    fn loss_gradient(&self, x: &[f64], y: usize) -> Vec<f64> {
        let mut up = self.probabilities(x);
        up[y] -= 1.0;
        self.logit_vjp(x, &up)
    }
}

/// Input gradient of the cross-entropy loss at `(x, y)`.
pub fn mlp_input_gradient(model: &MlpModel, x: &[f64], y: usize) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    if y >= model.num_classes() {
        return Err(crate::Error::invalid(format!("label {y} out of range")));
    }
    Ok(model.loss_gradient(x, y))
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
