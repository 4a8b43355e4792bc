//! Label-only optimization attack: minimize the boundary distance
//! `g(theta) = min { lambda > 0 : f(x + lambda theta / |theta|) != y }` over directions.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attacks::{l2_norm, AdversarialExample, AttackKind, CountingOracle};
use crate::classifiers::Classifier;
use crate::error::{check_dim, Error, Result};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BboxConfig {
    /// Random unit directions tried before refinement.
    pub directions: usize,
    /// Spacing of the coarse ray search.
    pub ray_step: f64,
    /// The ray search gives up beyond this distance.
    pub max_radius: f64,
    /// Width of the final bisection bracket.
    pub bs_tol: f64,
    /// Zeroth-order refinement proposals around the best direction.
    pub refine_iters: usize,
    /// Initial size of the refinement perturbation of the direction.
    pub refine_step: f64,
    /// Number of candidate points with a label other than `y` whose
    /// directions are tried before the random ones (only used when
    /// candidates are supplied).
    #[serde(default)]
    pub anchors: usize,
}

impl Default for BboxConfig {
    fn default() -> Self {
        Self {
            directions: 200,
            ray_step: 0.05,
            max_radius: 10.0,
            bs_tol: 1e-5,
            refine_iters: 100,
            refine_step: 0.2,
            anchors: 0,
        }
    }
}

impl BboxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.directions == 0 {
            return Err(Error::invalid("bbox needs at least one direction"));
        }
        if !(self.ray_step > 0.0 && self.max_radius >= self.ray_step && self.bs_tol > 0.0) {
            return Err(Error::invalid(
                "bbox needs 0 < ray_step <= max_radius and a positive bisection tolerance",
            ));
        }
        if !(self.refine_step >= 0.0) {
            return Err(Error::invalid("refine_step must be non-negative"));
        }
        Ok(())
    }
}

fn along(x: &[f64], dir: &[f64], lambda: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, b)| a + lambda * b).collect()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|a| a / n).collect())
}

/// Shrinks `(lo, hi)` until `hi - lo <= tol`, keeping `f(x + hi dir) != y`.
fn bisect<C: Classifier + ?Sized>(
    victim: &C,
    x: &[f64],
    y: usize,
    dir: &[f64],
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if victim.predict(&along(x, dir, mid)) != y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `g(theta)` by coarse ray search and bisection; `None` when no label change
/// is found within `max_radius`. With `upper`, only checks whether
/// `g(theta) < upper` and refines inside `[0, upper]`.
fn boundary_distance<C: Classifier + ?Sized>(
    victim: &C,
    x: &[f64],
    y: usize,
    dir: &[f64],
    cfg: &BboxConfig,
    upper: Option<f64>,
) -> Option<f64> {
    if let Some(g) = upper {
        if victim.predict(&along(x, dir, g)) == y {
            return None;
        }
        return Some(bisect(victim, x, y, dir, 0.0, g, cfg.bs_tol));
    }
    let mut lo = 0.0;
    let mut step = 1usize;
    loop {
        let lambda = step as f64 * cfg.ray_step;
        if lambda > cfg.max_radius {
            return None;
        }
        if victim.predict(&along(x, dir, lambda)) != y {
            return Some(bisect(victim, x, y, dir, lo, lambda, cfg.bs_tol));
        }
        lo = lambda;
        step += 1;
    }
}

/// Public form of the boundary-distance estimate along a fixed direction.
pub fn bbox_distance<C: Classifier + ?Sized>(
    victim: &C,
    x: &[f64],
    y: usize,
    theta: &[f64],
    cfg: &BboxConfig,
) -> Result<Option<f64>> {
    check_dim(victim.dim(), x.len())?;
    check_dim(x.len(), theta.len())?;
    cfg.validate()?;
    let dir =
        unit(theta).ok_or_else(|| Error::invalid("direction must be a non-zero finite vector"))?;
    Ok(boundary_distance(victim, x, y, &dir, cfg, None))
}

fn random_direction(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = unit(&v) {
            return u;
        }
    }
}

/// Searches random directions for the smallest boundary distance, then
/// refines the best direction by random local perturbations, keeping any
/// that shorten the distance. The perturbation size grows after a success
/// and shrinks after a failure. Every label query goes through a counter.
pub fn bbox_opt_attack<C: Classifier + ?Sized>(
    victim: &C,
    x: &[f64],
    y: usize,
    cfg: &BboxConfig,
    seed: u64,
) -> Result<AdversarialExample> {
    bbox_opt_attack_from(victim, x, y, cfg, seed, &[])
}

/// [`bbox_opt_attack`] that first tries the directions from `x` towards the
/// first `cfg.anchors` of `candidates` the victim labels differently from `y`.
/// Candidate labels are queried in order, and those queries are counted.
pub fn bbox_opt_attack_from<C: Classifier + ?Sized>(
    victim: &C,
    x: &[f64],
    y: usize,
    cfg: &BboxConfig,
    seed: u64,
    candidates: &[&[f64]],
) -> Result<AdversarialExample> {
    check_dim(victim.dim(), x.len())?;
    cfg.validate()?;
    for a in candidates {
        check_dim(x.len(), a.len())?;
    }
    let oracle = CountingOracle::new(victim);
    let mut rng = rng_from_seed(seed);
    let d = x.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut anchored: Vec<Vec<f64>> = Vec::new();
    for a in candidates {
        if anchored.len() == cfg.anchors {
            break;
        }
        if oracle.query(a) != y {
            anchored.extend(unit(
                &a.iter().zip(x).map(|(p, q)| p - q).collect::<Vec<f64>>(),
            ));
        }
    }
    let tries = anchored.len() + cfg.directions;
    let mut anchored = anchored.into_iter();
    for _ in 0..tries {
        let dir = anchored
            .next()
            .unwrap_or_else(|| random_direction(&mut rng, d));
        let upper = best.as_ref().map(|b| b.0);
        if let Some(g) = boundary_distance(&oracle, x, y, &dir, cfg, upper) {
            if upper.is_none_or(|u| g < u) {
                best = Some((g, dir));
            }
        }
    }
    let (mut g, mut dir) = best.ok_or_else(|| {
        Error::AttackInfeasible(format!(
            "no label change within radius {} along {} directions",
            cfg.max_radius,
            cfg.directions + cfg.anchors.min(candidates.len())
        ))
    })?;
    let mut step = cfg.refine_step;
    for _ in 0..cfg.refine_iters {
        let u = random_direction(&mut rng, d);
        let Some(cand) = unit(&along(&dir, &u, step)) else {
            continue;
        };
        match boundary_distance(&oracle, x, y, &cand, cfg, Some(g)) {
            Some(g2) if g2 < g => {
                g = g2;
                dir = cand;
                step = (step * 1.5).min(1.0);
            }
            _ => step *= 0.93,
        }
    }
    let perturbed = along(x, &dir, g);
    Ok(AdversarialExample::new(
        victim,
        x.to_vec(),
        perturbed,
        AttackKind::Bbox,
        oracle.queries(),
    ))
}
