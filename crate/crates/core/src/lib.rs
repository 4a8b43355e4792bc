//! Boundary-concentrated sampling, classical non-parametric estimators,
//! adversarial example generators and the train / generate / retrain
//! extraction pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod attacks;
pub mod classifiers;
pub mod data;
pub mod error;
pub mod neural;
pub mod persist;
pub mod rng;
pub mod stats;
pub mod theory;

pub use classifiers::{
    Classifier, FittedClassifier, KnnModel, KrrKernel, KrrModel, ModelSpec, NwKernel, NwModel,
};
pub use data::{BetaSamplerConfig, BoundingBox, Dataset, GroundTruth, HalfmoonTruth, Role};
pub use error::{Error, Result};
pub use neural::{DifferentiableModel, LinearModel, MlpModel, TrainConfig};
