//! Pool selection strategies.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::attacks::{deepfool, AdversarialExample};
use crate::classifiers::Classifier;
use crate::error::{check_dim, Error, Result};
use crate::neural::DifferentiableModel;
use crate::rng::rng_from_seed;

fn check_budget(pool_len: usize, budget: usize) -> Result<()> {
    if budget > pool_len {
        return Err(Error::invalid(format!(
            "budget {budget} exceeds pool size {pool_len}"
        )));
    }
    Ok(())
}

/// `budget` distinct indices drawn uniformly from `0..pool_len`.
///
/// The result is a prefix of one seeded permutation, so a smaller budget
/// with the same seed always selects a subset of a larger one.
pub fn select_random(pool_len: usize, budget: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(pool_len, budget)?;
    let mut idx: Vec<usize> = (0..pool_len).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    idx.truncate(budget);
    Ok(idx)
}

/// Stable ascending sort of indices by key, truncated to `budget`.
fn rank_ascending(keys: &[f64], budget: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    idx.truncate(budget);
    idx
}

/// Points whose victim score is closest to 1/2 first, ties by index.
pub fn select_margin<C: Classifier + ?Sized>(
    pool: &[Vec<f64>],
    victim: &C,
    budget: usize,
) -> Result<Vec<usize>> {
    check_budget(pool.len(), budget)?;
    let margins = pool
        .par_iter()
        .map(|x| {
            check_dim(victim.dim(), x.len())?;
            victim.score(x).map(|s| (s - 0.5).abs()).ok_or_else(|| {
                Error::Unsupported("margin selection needs a victim with score output".into())
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rank_ascending(&margins, budget))
}

fn deepfool_pool<M: DifferentiableModel + ?Sized>(
    pool: &[Vec<f64>],
    surrogate: &M,
    overshoot: f64,
    max_iter: usize,
) -> Result<Vec<AdversarialExample>> {
    pool.par_iter()
        .map(|x| deepfool(surrogate, x, overshoot, max_iter, false))
        .collect()
}

/// DeepFool settings used by the DFAL and max-confidence rankings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepFoolSettings {
    pub overshoot: f64,
    pub max_iter: usize,
}

impl Default for DeepFoolSettings {
    fn default() -> Self {
        Self {
            overshoot: 0.02,
            max_iter: 50,
        }
    }
}

/// Ranks the pool by DeepFool distance against `surrogate`, smallest first.
///
/// Returns the selected indices and their adversarial examples. With
/// `magnitude = Some(e)` each example's perturbation is rescaled to L2 norm
/// `e`; zero perturbations are left as they are.
pub fn select_dfal<M: DifferentiableModel + ?Sized>(
    pool: &[Vec<f64>],
    surrogate: &M,
    budget: usize,
    magnitude: Option<f64>,
    df: DeepFoolSettings,
) -> Result<(Vec<usize>, Vec<AdversarialExample>)> {
    check_budget(pool.len(), budget)?;
    if let Some(e) = magnitude {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::invalid(format!(
                "perturbation magnitude must be >= 0, got {e}"
            )));
        }
    }
    let advs = deepfool_pool(pool, surrogate, df.overshoot, df.max_iter)?;
    let dist: Vec<f64> = advs.iter().map(|a| a.perturbation_l2).collect();
    let chosen = rank_ascending(&dist, budget);
    let examples = chosen
        .iter()
        .map(|&i| {
            let a = &advs[i];
            match magnitude {
                Some(e) if a.perturbation_l2 > 0.0 => {
                    let s = e / a.perturbation_l2;
                    let p = a
                        .original
                        .iter()
                        .zip(&a.perturbed)
                        .map(|(o, q)| o + s * (q - o))
                        .collect();
                    AdversarialExample::new(surrogate, a.original.clone(), p, a.attack, 0)
                }
                _ => a.clone(),
            }
        })
        .collect();
    Ok((chosen, examples))
}

/// Ranks the pool by the surrogate's top class probability at the DeepFool
/// point, highest first, ties by index.
pub fn select_max_confidence<M: DifferentiableModel + ?Sized>(
    pool: &[Vec<f64>],
    surrogate: &M,
    budget: usize,
    df: DeepFoolSettings,
) -> Result<Vec<usize>> {
    check_budget(pool.len(), budget)?;
    let advs = deepfool_pool(pool, surrogate, df.overshoot, df.max_iter)?;
    let neg_conf: Vec<f64> = advs
        .iter()
        .map(|a| {
            -surrogate
                .probabilities(&a.perturbed)
                .into_iter()
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(rank_ascending(&neg_conf, budget))
}
