//! Datasets, ground-truth problems and boundary-concentrated sampling.

mod abalone;
mod dataset;
mod halfmoon;
mod mnist;
mod sampler;
mod truth;

pub use abalone::{load_abalone, parse_abalone, AGE_THRESHOLD};
pub use dataset::{BoundingBox, Dataset, Role};
pub use halfmoon::{generate_halfmoon, HalfmoonTruth, ARC_POINTS};
pub use mnist::{
    load_mnist_idx, mnist_from_idx, parse_idx_images, parse_idx_labels, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use sampler::{bernoulli_labels, sample_beta_concentrated, sample_labeled, BetaSamplerConfig};
pub use truth::{FnGroundTruth, GroundTruth};
