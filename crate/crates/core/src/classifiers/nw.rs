use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{squared_distance, Classifier, KnnModel};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

/// Radial smoothing kernels supported on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NwKernel {
    /// `max(0, 1 - |u|)`
    Triangular,
    /// `max(0, 1 - |u|^2)`
    Epanechnikov,
    /// `I(|u| < 1)`; not Lipschitz.
    Boxcar,
}

impl NwKernel {
    /// Kernel weight at scaled distance `r = |x - x_i| / h`.
    pub fn weight(self, r: f64) -> f64 {
        match self {
            NwKernel::Triangular => (1.0 - r).max(0.0),
            NwKernel::Epanechnikov => (1.0 - r * r).max(0.0),
            NwKernel::Boxcar => {
                if r < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_lipschitz(self) -> bool {
        !matches!(self, NwKernel::Boxcar)
    }
}

impl fmt::Display for NwKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NwKernel::Triangular => "triangular",
            NwKernel::Epanechnikov => "epanechnikov",
            NwKernel::Boxcar => "boxcar",
        })
    }
}

impl FromStr for NwKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(NwKernel::Triangular),
            "epanechnikov" => Ok(NwKernel::Epanechnikov),
            "boxcar" => Ok(NwKernel::Boxcar),
            other => Err(Error::invalid(format!(
                "unknown kernel `{other}` (triangular, epanechnikov, boxcar)"
            ))),
        }
    }
}

/// Nadaraya-Watson estimate `sum K((x - x_i)/h) y_i / sum K((x - x_i)/h)`.
///
/// Where no training point falls inside the bandwidth the weights are all
/// zero; the model then answers with the label of the nearest training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwModel {
    bandwidth: f64,
    kernel: NwKernel,
    train: Dataset,
}

impl NwModel {
    pub fn fit(train: &Dataset, bandwidth: f64, kernel: NwKernel) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if train.num_classes() != 2 {
            return Err(Error::Unsupported("Nadaraya-Watson is binary only".into()));
        }
        if train.is_empty() {
            return Err(Error::invalid("cannot fit on an empty training set"));
        }
        Ok(Self {
            bandwidth,
            kernel,
            train: train.clone(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> NwKernel {
        self.kernel
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn predict_eta(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.train.dim(), x.len())?;
        Ok(self.eta(x))
    }

    fn eta(&self, x: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, row) in self.train.rows().enumerate() {
            let d2 = squared_distance(x, row);
            if d2 < nearest.0 {
                nearest = (d2, i);
            }
            let w = self.kernel.weight(d2.sqrt() / self.bandwidth);
            if w > 0.0 {
                num += w * self.train.label(i) as f64;
                den += w;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            self.train.label(nearest.1) as f64
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        Ok(usize::from(self.predict_eta(x)? > 0.5))
    }

    /// The 1-NN model used for the empty-neighbourhood fallback.
    pub fn fallback(&self) -> KnnModel {
        KnnModel::fit(&self.train, 1).expect("non-empty training set")
    }
}

impl Classifier for NwModel {
    fn dim(&self) -> usize {
        self.train.dim()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.eta(x) > 0.5)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        Some(self.eta(x))
    }
}
