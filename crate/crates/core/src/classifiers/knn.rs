use serde::{Deserialize, Serialize};

use crate::classifiers::{squared_distance_within, Classifier};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

/// Exact k-nearest-neighbour model over Euclidean distance.
///
/// Neighbours are ordered by distance, then by training index, so equal
/// distances always resolve to the earlier training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnnParts")]
pub struct KnnModel {
    k: usize,
    train: Dataset,
    #[serde(skip)]
    axis: AxisOrder,
}

#[derive(Deserialize)]
struct KnnParts {
    k: usize,
    train: Dataset,
}

impl TryFrom<KnnParts> for KnnModel {
    type Error = Error;

    fn try_from(p: KnnParts) -> Result<Self> {
        KnnModel::fit(&p.train, p.k)
    }
}

/// Training indices sorted along the coordinate of largest variance. A
/// search walks outwards from the query's position and stops on each side
/// once the gap along that axis alone exceeds the current k-th distance.
#[derive(Debug, Clone, Default, PartialEq)]
struct AxisOrder {
    axis: usize,
    keys: Vec<f64>,
    order: Vec<usize>,
}

impl AxisOrder {
    fn new(train: &Dataset) -> Self {
        let (n, d) = (train.len(), train.dim());
        if n == 0 || d == 0 {
            return Self::default();
        }
        let axis = (0..d)
            .map(|j| {
                let mean = train.rows().map(|r| r[j]).sum::<f64>() / n as f64;
                train.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>()
            })
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (j, v)| if v > b.1 { (j, v) } else { b },
            )
            .0;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            train.row(a)[axis]
                .total_cmp(&train.row(b)[axis])
                .then(a.cmp(&b))
        });
        let keys = order.iter().map(|&i| train.row(i)[axis]).collect();
        Self { axis, keys, order }
    }
}

/// A training point found by a neighbour query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sq_dist: f64,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if k > train.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the {} training points",
                train.len()
            )));
        }
        Ok(Self {
            k,
            train: train.clone(),
            axis: AxisOrder::new(train),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    /// The `k` nearest training points, closest first.
    pub fn neighbors(&self, x: &[f64]) -> Vec<Neighbor> {
        self.nearest_where(x, self.k, |_| true)
    }

    /// The `m` nearest training points whose label satisfies `keep`.
    pub fn nearest_where(
        &self,
        x: &[f64],
        m: usize,
        keep: impl Fn(usize) -> bool,
    ) -> Vec<Neighbor> {
        assert_eq!(x.len(), self.train.dim(), "query dimension");
        let mut best: Vec<Neighbor> = Vec::with_capacity(m + 1);
        if m == 0 {
            return best;
        }
        let ax = &self.axis;
        let q = x[ax.axis];
        let start = ax.keys.partition_point(|&k| k < q);
        let bound = |best: &Vec<Neighbor>| {
            if best.len() == m {
                best[m - 1].sq_dist
            } else {
                f64::INFINITY
            }
        };
        let visit = |pos: usize, best: &mut Vec<Neighbor>| {
            let index = ax.order[pos];
            if !keep(self.train.label(index)) {
                return;
            }
            let Some(sq_dist) = squared_distance_within(x, self.train.row(index), bound(best))
            else {
                return;
            };
            let at = best.partition_point(|n| (n.sq_dist, n.index) < (sq_dist, index));
            if at < m {
                best.insert(at, Neighbor { index, sq_dist });
                best.truncate(m);
            }
        };
        let (mut lo, mut hi) = (start, start);
        let n = ax.order.len();
        loop {
            let b = bound(&best);
            let left = (lo > 0)
                .then(|| (q - ax.keys[lo - 1]).powi(2))
                .filter(|g| *g <= b);
            let right = (hi < n)
                .then(|| (ax.keys[hi] - q).powi(2))
                .filter(|g| *g <= b);
            match (left, right) {
                (None, None) => break,
                (Some(l), Some(r)) if l <= r => {
                    lo -= 1;
                    visit(lo, &mut best);
                }
                (Some(_), None) => {
                    lo -= 1;
                    visit(lo, &mut best);
                }
                _ => {
                    visit(hi, &mut best);
                    hi += 1;
                }
            }
        }
        best
    }

    /// Nearest training point with a label different from `label`.
    pub fn nearest_other_label(&self, x: &[f64], label: usize) -> Option<Neighbor> {
        self.nearest_where(x, 1, |y| y != label).pop()
    }

    /// `eta_hat(x)`: mean label of the k nearest neighbours (binary labels).
    pub fn predict_eta(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.train.dim(), x.len())?;
        Ok(self.eta(x))
    }

    fn eta(&self, x: &[f64]) -> f64 {
        let nb = self.neighbors(x);
        nb.iter()
            .map(|n| self.train.label(n.index) as f64)
            .sum::<f64>()
            / self.k as f64
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.train.dim(), x.len())?;
        Ok(self.predict(x))
    }
}

impl Classifier for KnnModel {
    fn dim(&self) -> usize {
        self.train.dim()
    }

    fn num_classes(&self) -> usize {
        self.train.num_classes()
    }

    /// Majority vote; for two classes this is `I(eta_hat > 1/2)`, so an exact
    /// tie goes to class 0. Multi-class ties go to the lowest class.
    fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.train.num_classes()];
        for n in self.neighbors(x) {
            votes[self.train.label(n.index)] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        (self.train.num_classes() == 2).then(|| self.eta(x))
    }
}
