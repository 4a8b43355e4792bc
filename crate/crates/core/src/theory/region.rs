use std::fmt::Write as _;

use rayon::prelude::*;

use crate::classifiers::Classifier;
use crate::data::GroundTruth;
use crate::error::{check_dim, Error, Result};

/// Largest dimension for which full grids are evaluated.
pub const MAX_GRID_DIM: usize = 3;

/// Default grid resolution per axis for two-dimensional problems.
pub const DEFAULT_GRID_RESOLUTION: usize = 200;

/// Regular grid over a ground truth's support with the posterior cached at
/// every node. Weights are trapezoid-rule cell volumes normalized to sum to 1.
#[derive(Debug, Clone)]
pub struct Grid {
    pub resolution: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Grid {
    pub fn new<G: GroundTruth + ?Sized>(gt: &G, resolution: usize) -> Result<Self> {
        let d = gt.dim();
        if d > MAX_GRID_DIM {
            return Err(Error::Unsupported(format!(
                "grid evaluation is limited to d <= {MAX_GRID_DIM} (got d = {d}); use test-set accuracy"
            )));
        }
        if resolution < 2 {
            return Err(Error::invalid("grid resolution must be at least 2"));
        }
        let points = gt.support().grid(resolution);
        let axis: Vec<f64> = (0..resolution)
            .map(|i| {
                if i == 0 || i + 1 == resolution {
                    0.5
                } else {
                    1.0
                }
            })
            .collect();
        let axis_total: f64 = axis.iter().sum();
        let weights: Vec<f64> = (0..points.len())
            .map(|mut flat| {
                let mut w = 1.0;
                for _ in 0..d {
                    w *= axis[flat % resolution] / axis_total;
                    flat /= resolution;
                }
                w
            })
            .collect();
        let eta = points.par_iter().map(|x| gt.eta(x)).collect();
        Ok(Self {
            resolution,
            points,
            weights,
            eta,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bayes_label(&self, i: usize) -> usize {
        usize::from(self.eta[i] > 0.5)
    }
}

/// Where a classifier agrees with the Bayes rule on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub points: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub margin: Vec<f64>,
    pub predicted: Vec<usize>,
    pub bayes: Vec<usize>,
    pub correct: Vec<bool>,
    /// Mean of `correct`.
    pub correct_fraction: f64,
    /// Share of the support's volume (trapezoid rule) where the classifier is correct.
    pub correct_measure: f64,
}

/// Evaluates `clf` on a `resolution^d` grid over the support of `gt`.
pub fn correctness_region<C, G>(clf: &C, gt: &G, resolution: usize) -> Result<RegionReport>
where
    C: Classifier + ?Sized,
    G: GroundTruth + ?Sized,
{
    check_dim(gt.dim(), clf.dim())?;
    let grid = Grid::new(gt, resolution)?;
    Ok(correctness_on_grid(clf, &grid))
}

pub fn correctness_on_grid<C: Classifier + ?Sized>(clf: &C, grid: &Grid) -> RegionReport {
    let predicted: Vec<usize> = grid.points.par_iter().map(|x| clf.predict(x)).collect();
    let bayes: Vec<usize> = (0..grid.len()).map(|i| grid.bayes_label(i)).collect();
    let correct: Vec<bool> = predicted.iter().zip(&bayes).map(|(a, b)| a == b).collect();
    let hits = correct.iter().filter(|&&c| c).count();
    let correct_measure = correct
        .iter()
        .zip(&grid.weights)
        .filter(|(c, _)| **c)
        .map(|(_, w)| w)
        .sum();
    RegionReport {
        points: grid.points.clone(),
        margin: grid.eta.iter().map(|e| (e - 0.5).abs()).collect(),
        eta: grid.eta.clone(),
        predicted,
        bayes,
        correct_fraction: if correct.is_empty() {
            0.0
        } else {
            hits as f64 / correct.len() as f64
        },
        correct,
        correct_measure,
    }
}

impl RegionReport {
    /// One row per grid point.
    pub fn to_csv_string(&self) -> String {
        let d = self.points.first().map_or(0, Vec::len);
        let mut out = String::from("# schema=v1\n");
        for i in 0..d {
            write!(out, "x{i},").unwrap();
        }
        out.push_str("eta,margin,label,bayes,correct\n");
        for i in 0..self.points.len() {
            for v in &self.points[i] {
                write!(out, "{v:?},").unwrap();
            }
            writeln!(
                out,
                "{:?},{:?},{},{},{}",
                self.eta[i],
                self.margin[i],
                self.predicted[i],
                self.bayes[i],
                u8::from(self.correct[i])
            )
            .unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "grid points: {}\ncorrect fraction: {:.6}\ncorrect measure: {:.6}\n",
            self.points.len(),
            self.correct_fraction,
            self.correct_measure
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BoundingBox, FnGroundTruth};

    struct Threshold(f64);

    impl Classifier for Threshold {
        fn dim(&self) -> usize {
            1
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn predict(&self, x: &[f64]) -> usize {
            usize::from(x[0] > self.0)
        }
    }

    #[test]
    fn bayes_rule_is_fully_correct() {
        let gt = FnGroundTruth::new(BoundingBox::unit(1), |x: &[f64]| x[0]);
        let r = correctness_region(&Threshold(0.5), &gt, 101).unwrap();
        assert_eq!(r.correct_fraction, 1.0);
        assert!((r.correct_measure - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_threshold_measure() {
        let gt = FnGroundTruth::new(BoundingBox::unit(1), |x: &[f64]| x[0]);
        let r = correctness_region(&Threshold(0.7), &gt, 1001).unwrap();
        assert!((r.correct_measure - 0.8).abs() < 2e-3);
        let flags = r.correct.iter().filter(|&&c| c).count() as f64 / r.correct.len() as f64;
        assert_eq!(flags, r.correct_fraction);
    }

    #[test]
    fn high_dimension_rejected() {
        let gt = FnGroundTruth::new(BoundingBox::unit(4), |x: &[f64]| x[0]);
        assert!(matches!(Grid::new(&gt, 3), Err(Error::Unsupported(_))));
    }
}
