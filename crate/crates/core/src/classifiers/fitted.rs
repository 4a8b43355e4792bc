use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, KnnModel, KrrKernel, KrrModel, NwKernel, NwModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::neural::{mlp_train, DifferentiableModel, MlpModel, TrainConfig};
use crate::persist;

/// Any fitted model, tagged by kind for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedClassifier {
    Knn(KnnModel),
    Nw(NwModel),
    Krr(KrrModel),
    Mlp(MlpModel),
}

impl FittedClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedClassifier::Knn(_) => "knn",
            FittedClassifier::Nw(_) => "nw",
            FittedClassifier::Krr(_) => "krr",
            FittedClassifier::Mlp(_) => "mlp",
        }
    }

    pub fn as_knn(&self) -> Option<&KnnModel> {
        match self {
            FittedClassifier::Knn(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_mlp(&self) -> Option<&MlpModel> {
        match self {
            FittedClassifier::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_differentiable(&self) -> Option<&dyn DifferentiableModel> {
        self.as_mlp().map(|m| m as &dyn DifferentiableModel)
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            FittedClassifier::Knn(m) => m,
            FittedClassifier::Nw(m) => m,
            FittedClassifier::Krr(m) => m,
            FittedClassifier::Mlp(m) => m,
        }
    }

    pub fn to_model_string(&self) -> Result<String> {
        persist::to_model_string(self)
    }

    pub fn from_model_str(text: &str) -> Result<Self> {
        persist::from_model_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        persist::save_model(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        persist::load_model(path)
    }
}

impl Classifier for FittedClassifier {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn num_classes(&self) -> usize {
        self.inner().num_classes()
    }

    fn predict(&self, x: &[f64]) -> usize {
        self.inner().predict(x)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        self.inner().score(x)
    }
}

/// Unfitted model description, written `knn:K`, `nw:H[:KERNEL]`,
/// `krr:LAMBDA[:linear|:gaussian[:GAMMA]]` or `mlp[:H1,H2,..[:EPOCHS[:LR]]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Knn {
        k: usize,
    },
    Nw {
        bandwidth: f64,
        kernel: NwKernel,
    },
    /// `gamma: None` selects the median heuristic at fit time.
    Krr {
        lambda: f64,
        linear: bool,
        gamma: Option<f64>,
    },
    Mlp {
        hidden: Vec<usize>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
    },
}

impl ModelSpec {
    pub fn mlp_default() -> Self {
        let cfg = TrainConfig::default();
        ModelSpec::Mlp {
            hidden: cfg.hidden,
            epochs: cfg.epochs,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
        }
    }

    /// Fits on `train`; `seed` only matters for models with random initialization.
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedClassifier> {
        Ok(match self {
            ModelSpec::Knn { k } => FittedClassifier::Knn(KnnModel::fit(train, *k)?),
            ModelSpec::Nw { bandwidth, kernel } => {
                FittedClassifier::Nw(NwModel::fit(train, *bandwidth, *kernel)?)
            }
            ModelSpec::Krr {
                lambda,
                linear,
                gamma,
            } => {
                let kernel = match (linear, gamma) {
                    (true, _) => KrrKernel::Linear,
                    (false, Some(g)) => KrrKernel::Gaussian { gamma: *g },
                    (false, None) => KrrKernel::gaussian_median_heuristic(train)?,
                };
                FittedClassifier::Krr(KrrModel::fit(train, *lambda, kernel)?)
            }
            ModelSpec::Mlp {
                hidden,
                epochs,
                learning_rate,
                batch_size,
            } => {
                let cfg = TrainConfig {
                    hidden: hidden.clone(),
                    epochs: *epochs,
                    batch_size: *batch_size,
                    learning_rate: *learning_rate,
                    seed,
                };
                FittedClassifier::Mlp(mlp_train(train, &cfg)?.0)
            }
        })
    }

    /// Smallest training set the model can be fitted on.
    pub fn min_train_size(&self) -> usize {
        match self {
            ModelSpec::Knn { k } => *k,
            ModelSpec::Krr {
                linear: false,
                gamma: None,
                ..
            } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Knn { k } => write!(f, "knn:{k}"),
            ModelSpec::Nw { bandwidth, kernel } => write!(f, "nw:{bandwidth}:{kernel}"),
            ModelSpec::Krr {
                lambda,
                linear: true,
                ..
            } => write!(f, "krr:{lambda}:linear"),
            ModelSpec::Krr {
                lambda,
                gamma: None,
                ..
            } => write!(f, "krr:{lambda}:gaussian"),
            ModelSpec::Krr {
                lambda,
                gamma: Some(g),
                ..
            } => write!(f, "krr:{lambda}:gaussian:{g}"),
            ModelSpec::Mlp {
                hidden,
                epochs,
                learning_rate,
                ..
            } => {
                let h: Vec<String> = hidden.iter().map(|v| v.to_string()).collect();
                write!(f, "mlp:{}:{epochs}:{learning_rate}", h.join(","))
            }
        }
    }
}

fn num<T: FromStr>(spec: &str, field: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("model spec `{spec}`: bad {field} `{v}`")))
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let too_many = || Error::invalid(format!("model spec `{s}` has too many fields"));
        match parts[0] {
            "knn" => {
                if parts.len() > 2 {
                    return Err(too_many());
                }
                let k = parts.get(1).map_or(Ok(1), |v| num(s, "k", v))?;
                Ok(ModelSpec::Knn { k })
            }
            "nw" => {
                if parts.len() > 3 {
                    return Err(too_many());
                }
                let bandwidth = parts.get(1).map_or(Ok(0.15), |v| num(s, "bandwidth", v))?;
                let kernel = parts
                    .get(2)
                    .map_or(Ok(NwKernel::Triangular), |v| v.parse())?;
                Ok(ModelSpec::Nw { bandwidth, kernel })
            }
            "krr" => {
                if parts.len() > 4 {
                    return Err(too_many());
                }
                let lambda = parts.get(1).map_or(Ok(0.1), |v| num(s, "lambda", v))?;
                let (linear, gamma) = match parts.get(2).copied() {
                    None | Some("gaussian") => {
                        (false, parts.get(3).map(|v| num(s, "gamma", v)).transpose()?)
                    }
                    Some("linear") if parts.len() == 3 => (true, None),
                    Some(other) => {
                        return Err(Error::invalid(format!(
                            "model spec `{s}`: unknown kernel `{other}` (linear, gaussian)"
                        )))
                    }
                };
                Ok(ModelSpec::Krr {
                    lambda,
                    linear,
                    gamma,
                })
            }
            "mlp" => {
                if parts.len() > 4 {
                    return Err(too_many());
                }
                let ModelSpec::Mlp {
                    mut hidden,
                    mut epochs,
                    mut learning_rate,
                    batch_size,
                } = ModelSpec::mlp_default()
                else {
                    unreachable!()
                };
                if let Some(h) = parts.get(1) {
                    hidden = h
                        .split(',')
                        .filter(|v| !v.is_empty())
                        .map(|v| num(s, "hidden width", v))
                        .collect::<Result<_>>()?;
                }
                if let Some(e) = parts.get(2) {
                    epochs = num(s, "epochs", e)?;
                }
                if let Some(lr) = parts.get(3) {
                    learning_rate = num(s, "learning rate", lr)?;
                }
                Ok(ModelSpec::Mlp {
                    hidden,
                    epochs,
                    learning_rate,
                    batch_size,
                })
            }
            other => Err(Error::invalid(format!(
                "unknown model kind `{other}` (knn, nw, krr, mlp)"
            ))),
        }
    }
}
