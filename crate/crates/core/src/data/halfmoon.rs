//! Two interleaving half circles ("two moons").
//!
//! Class 0 lives on the upper unit arc `(cos t, sin t)`, class 1 on the lower
//! arc `(1 - cos t, 1/2 - sin t)`, `t` uniform on `[0, pi]`, both blurred by
//! isotropic Gaussian noise. The posterior is computed from 360 evenly
//! spaced arc points per class: each class-conditional density is the average
//! of Gaussians centred on its arc points, and `eta = p1 / (p0 + p1)`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{BoundingBox, Dataset, GroundTruth, Role};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const ARC_POINTS: usize = 360;

/// Support margin around the arcs, in units of the noise level.
const SUPPORT_MARGIN_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfmoonTruth {
    sigma: f64,
    arcs: [Vec<[f64; 2]>; 2],
    support: BoundingBox,
}

impl HalfmoonTruth {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "noise sigma must be positive, got {sigma}"
            )));
        }
        let ts = (0..ARC_POINTS).map(|j| PI * j as f64 / (ARC_POINTS - 1) as f64);
        let upper: Vec<[f64; 2]> = ts.clone().map(|t| [t.cos(), t.sin()]).collect();
        let lower: Vec<[f64; 2]> = ts.map(|t| [1.0 - t.cos(), 0.5 - t.sin()]).collect();
        let m = SUPPORT_MARGIN_SIGMAS * sigma;
        let support = BoundingBox::new(vec![-1.0 - m, -0.5 - m], vec![2.0 + m, 1.0 + m])?;
        Ok(Self {
            sigma,
            arcs: [upper, lower],
            support,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Point reflection through `(1/2, 1/4)`, which swaps the two arcs.
    pub fn swap_arcs(x: &[f64]) -> [f64; 2] {
        [1.0 - x[0], 0.5 - x[1]]
    }

    /// Log of the (unnormalized) class-conditional density of `class` at `x`.
    fn log_density(&self, class: usize, x: &[f64]) -> f64 {
        let scale = 0.5 / (self.sigma * self.sigma);
        let mut exps = [0.0f64; ARC_POINTS];
        let mut best = f64::NEG_INFINITY;
        for (e, a) in exps.iter_mut().zip(&self.arcs[class]) {
            let dx = x[0] - a[0];
            let dy = x[1] - a[1];
            *e = -(dx * dx + dy * dy) * scale;
            best = best.max(*e);
        }
        // terms more than e^-50 below the largest cannot move the sum
        let sum: f64 = exps
            .iter()
            .filter(|&&e| e - best > -50.0)
            .map(|e| (e - best).exp())
            .sum();
        best + sum.ln()
    }
}

impl GroundTruth for HalfmoonTruth {
    fn dim(&self) -> usize {
        2
    }

    fn eta(&self, x: &[f64]) -> f64 {
        let l0 = self.log_density(0, x);
        let l1 = self.log_density(1, x);
        1.0 / (1.0 + (l0 - l1).exp())
    }

    fn support(&self) -> &BoundingBox {
        &self.support
    }
}

/// Draws `n` two-moons points (class 0 gets the extra point when `n` is odd),
/// shuffled, together with the matching ground truth.
pub fn generate_halfmoon(n: usize, sigma: f64, seed: u64) -> Result<(Dataset, HalfmoonTruth)> {
    if n < 2 {
        return Err(Error::invalid(format!("halfmoon needs n >= 2, got {n}")));
    }
    let truth = HalfmoonTruth::new(sigma)?;
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let n1 = n / 2;
    let n0 = n - n1;
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n);
    for (class, count) in [(0usize, n0), (1, n1)] {
        for _ in 0..count {
            let t = rng.random_range(0.0..=PI);
            let (cx, cy) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            rows.push((
                vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)],
                class,
            ));
        }
    }
    rows.shuffle(&mut rng);
    let (points, labels): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
    let ds = Dataset::from_rows("halfmoon", Role::Train, 2, &points, labels)?;
    Ok((ds, truth))
}
