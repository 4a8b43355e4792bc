use serde::{Deserialize, Serialize};

use crate::classifiers::Classifier;
use crate::error::{Error, Result};
use crate::neural::DifferentiableModel;

/// Binary linear classifier `f(x) = w . x + b`, exposed with logits `[0, f(x)]`
/// so the softmax is the logistic model and the logit difference is `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weight vector must be non-empty"));
        }
        if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
            return Err(Error::Numeric("non-finite linear parameters".into()));
        }
        Ok(Self { w, b })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.b + self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        Some(1.0 / (1.0 + (-self.decision(x)).exp()))
    }
}

impl DifferentiableModel for LinearModel {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.decision(x)]
    }

    fn logit_vjp(&self, _x: &[f64], upstream: &[f64]) -> Vec<f64> {
        self.w.iter().map(|w| w * upstream[1]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_gradient_at_origin() {
        let m = LinearModel::new(vec![1.0], 0.0).unwrap();
        assert_eq!(m.loss_gradient(&[0.0], 0), vec![0.5]);
        assert_eq!(m.predict(&[0.0]), 0);
    }
}
