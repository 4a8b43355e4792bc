//! k-NN, Nadaraya-Watson and kernel ridge estimators behind a common
//! [`Classifier`] interface.

mod fitted;
mod knn;
mod krr;
mod nw;

pub use fitted::{FittedClassifier, ModelSpec};
pub use knn::{KnnModel, Neighbor};
pub use krr::{KrrKernel, KrrModel, RESIDUAL_TOLERANCE};
pub use nw::{NwKernel, NwModel};

use crate::data::Dataset;

/// A fitted, immutable classifier usable as a label oracle.
///
/// Callers are responsible for passing inputs of dimension [`Classifier::dim`];
/// the checked entry points live on the concrete model types.
pub trait Classifier: Sync {
    fn dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn predict(&self, x: &[f64]) -> usize;

    /// Estimate of `P(y = 1 | x)` for binary models that expose one.
    fn score(&self, x: &[f64]) -> Option<f64> {
        let _ = x;
        None
    }

    /// Fraction of `data` whose label matches the prediction; 0 on an empty set.
    fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .rows()
            .zip(data.labels())
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / data.len() as f64
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict(&self, x: &[f64]) -> usize {
        (**self).predict(x)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        (**self).score(x)
    }
}

/// Summed in four interleaved lanes, combined as `(l0 + l1) + (l2 + l3)`.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance_within(a, b, f64::INFINITY).unwrap_or(f64::NAN)
}

const LANE_CHUNK: usize = 64;

/// `Some(squared_distance(a, b))` if it is at most `bound`, else `None`;
/// gives up early once a partial sum exceeds `bound`.
pub fn squared_distance_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let n = a.len() - a.len() % 4;
    let mut i = 0;
    while i < n {
        let end = (i + LANE_CHUNK).min(n);
        while i < end {
            for (l, lane) in lanes.iter_mut().enumerate() {
                let d = a[i + l] - b[i + l];
                *lane += d * d;
            }
            i += 4;
        }
        if end < n && (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) > bound {
            return None;
        }
    }
    for (l, j) in (n..a.len()).enumerate() {
        let d = a[j] - b[j];
        lanes[l] += d * d;
    }
    let total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    (total <= bound).then_some(total)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}
