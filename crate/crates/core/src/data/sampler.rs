//! Rejection sampler for the boundary-concentrated density
//! `mu_beta(x) ∝ max(|eta(x) - 1/2|, eps)^(-beta)` on the support box.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, Role};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, split_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSamplerConfig {
    pub beta: f64,
    /// Floor on `|eta - 1/2|` that keeps the density bounded near the boundary.
    pub density_floor: f64,
    /// Consecutive rejections tolerated before giving up.
    pub max_rejections: u64,
    pub seed: u64,
}

impl Default for BetaSamplerConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            density_floor: 1e-3,
            max_rejections: 50_000_000,
            seed: 0,
        }
    }
}

impl BetaSamplerConfig {
    pub fn new(beta: f64, seed: u64) -> Self {
        Self {
            beta,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.density_floor > 0.0 && self.density_floor < 0.5) {
            return Err(Error::invalid(format!(
                "density floor must lie in (0, 0.5), got {}",
                self.density_floor
            )));
        }
        if self.max_rejections == 0 {
            return Err(Error::invalid("max_rejections must be positive"));
        }
        Ok(())
    }

    /// Probability of accepting a uniform proposal with the given margin:
    /// `(max(margin, eps) / eps)^(-beta)`, exactly 1 once the floor saturates.
    pub fn acceptance_probability(&self, margin: f64) -> f64 {
        if self.beta == 0.0 || margin <= self.density_floor {
            1.0
        } else {
            (self.density_floor / margin).powf(self.beta)
        }
    }
}

/// Draws `n` i.i.d. points from `mu_beta` by proposing uniformly on the
/// support and accepting with [`BetaSamplerConfig::acceptance_probability`].
pub fn sample_beta_concentrated<G: GroundTruth + ?Sized>(
    truth: &G,
    cfg: &BetaSamplerConfig,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let support = truth.support();
    let d = support.dim();
    let mut out = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    let mut since_accept: u64 = 0;
    let mut unit = vec![0.0; d];
    while out.len() < n {
        for u in unit.iter_mut() {
            *u = rng.random::<f64>();
        }
        let x = support.from_unit(&unit);
        let u: f64 = rng.random();
        proposals += 1;
        let accept = cfg.beta == 0.0 || u < cfg.acceptance_probability(truth.margin(&x));
        if accept {
            out.push(x);
            since_accept = 0;
        } else {
            since_accept += 1;
            if since_accept >= cfg.max_rejections {
                return Err(Error::SamplerStalled {
                    proposals,
                    acceptance_rate: out.len() as f64 / proposals as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Labels points with `y ~ Bernoulli(eta(x))`.
pub fn bernoulli_labels<G: GroundTruth + ?Sized>(
    truth: &G,
    points: &[Vec<f64>],
    rng: &mut Rng,
) -> Vec<usize> {
    points
        .iter()
        .map(|x| usize::from(rng.random::<f64>() < truth.eta(x)))
        .collect()
}

/// A labeled training set drawn from `mu_beta` with Bernoulli labels. The
/// labels use a stream split off `cfg.seed`, independent of the locations.
pub fn sample_labeled<G: GroundTruth + ?Sized>(
    truth: &G,
    cfg: &BetaSamplerConfig,
    n: usize,
    name: &str,
) -> Result<Dataset> {
    let points = sample_beta_concentrated(truth, cfg, n)?;
    let mut rng = rng_from_seed(split_seed(cfg.seed, u64::MAX));
    let labels = bernoulli_labels(truth, &points, &mut rng);
    Dataset::new(name, Role::Train, truth.dim(), 2, points.concat(), labels)
}
