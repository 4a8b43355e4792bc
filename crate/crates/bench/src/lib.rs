//! Shared fixtures for the criterion benchmarks.

use boundarylab::data::generate_halfmoon;
use boundarylab::{Dataset, MlpModel};

/// Halfmoon training set of `n` points.
pub fn halfmoon(n: usize, seed: u64) -> Dataset {
    generate_halfmoon(n, 0.2, seed)
        .expect("valid halfmoon parameters")
        .0
}

/// Points spread over the Halfmoon support, used as queries.
pub fn queries(n: usize) -> Vec<Vec<f64>> {
    halfmoon(n, 99).rows().map(<[f64]>::to_vec).collect()
}

/// Randomly initialized network with the given layer sizes.
pub fn mlp(sizes: &[usize]) -> MlpModel {
    MlpModel::glorot(sizes, 7).expect("valid layer sizes")
}
