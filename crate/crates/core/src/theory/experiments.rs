use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{squared_distance, Classifier, KnnModel, ModelSpec};
use crate::data::{sample_beta_concentrated, sample_labeled, BetaSamplerConfig, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::stats::{mean, spearman};
use crate::theory::bounds::{kth_distance, thm1_constants, Thm1Params};
use crate::theory::region::{correctness_on_grid, Grid};

/// Largest central-difference gradient norm of `eta` over a grid; a numerical
/// stand-in for its Lipschitz constant.
pub fn estimate_lipschitz<G: GroundTruth + ?Sized>(gt: &G, resolution: usize) -> Result<f64> {
    let support = gt.support();
    let points = Grid::new(gt, resolution)?.points;
    let steps: Vec<f64> = support
        .lower
        .iter()
        .zip(&support.upper)
        .map(|(l, u)| 1e-5 * (u - l))
        .collect();
    Ok(points
        .par_iter()
        .map(|x| {
            let mut g2 = 0.0;
            let mut y = x.clone();
            for j in 0..x.len() {
                y[j] = x[j] + steps[j];
                let up = gt.eta(&y);
                y[j] = x[j] - steps[j];
                let down = gt.eta(&y);
                y[j] = x[j];
                g2 += ((up - down) / (2.0 * steps[j])).powi(2);
            }
            g2.sqrt()
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub beta: f64,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub trials: usize,
    pub alpha: f64,
    /// `None` estimates the constant numerically from the ground truth.
    pub lipschitz: Option<f64>,
    /// Multiplier applied to the Lipschitz constant inside the bound.
    pub lipschitz_scale: f64,
    pub c_dp: f64,
    pub grid_resolution: usize,
    /// Size of the independent sample that defines `r_p` under `mu_beta`.
    pub reference_samples: usize,
    pub density_floor: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            n: 500,
            k: 25,
            delta: 0.05,
            trials: 200,
            alpha: 1.0,
            lipschitz: None,
            lipschitz_scale: 1.0,
            c_dp: 1.0,
            grid_resolution: 50,
            reference_samples: 5000,
            density_floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// `sup_x |eta_hat(x) - eta(x)|` over the grid.
    pub sup_error: f64,
    /// `min_x (bound(x) - |eta_hat(x) - eta(x)|)`; negative means a violation.
    pub min_slack: f64,
    pub violated: bool,
    /// Grid points inside the predicted correct set.
    pub predicted_set_size: usize,
    /// Whether any of those points is misclassified.
    pub predicted_set_error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub c0: f64,
    pub delta_p: f64,
    pub lipschitz: f64,
    /// False when `k/n + delta_p > 1`; the bound is then vacuous.
    pub radius_defined: bool,
    pub trials: Vec<TrialOutcome>,
    pub violation_fraction: f64,
    pub predicted_set_failure_fraction: f64,
}

fn sampler(cfg: &VerifyConfig, seed: u64) -> BetaSamplerConfig {
    BetaSamplerConfig {
        beta: cfg.beta,
        density_floor: cfg.density_floor,
        seed,
        ..Default::default()
    }
}

/// Monte-Carlo check of the uniform k-NN deviation bound
/// `|eta_hat(x) - eta(x)| < L r_{k/n + delta_p}(x)^alpha + C0` over a grid.
pub fn verify_knn_bound<G: GroundTruth + ?Sized>(
    gt: &G,
    cfg: &VerifyConfig,
) -> Result<VerifyReport> {
    if cfg.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let lipschitz = match cfg.lipschitz {
        Some(l) => l,
        None => estimate_lipschitz(gt, 4 * cfg.grid_resolution)?,
    } * cfg.lipschitz_scale;
    let params = Thm1Params {
        n: cfg.n,
        k: cfg.k,
        d: gt.dim(),
        delta: cfg.delta,
        alpha: cfg.alpha,
        lipschitz,
        c_dp: cfg.c_dp,
    };
    let (c0, delta_p) = thm1_constants(&params)?;
    let grid = Grid::new(gt, cfg.grid_resolution)?;
    let mass = cfg.k as f64 / cfg.n as f64 + delta_p;
    let radius_defined = mass <= 1.0;
    let bound: Vec<f64> = if radius_defined {
        let reference = sample_beta_concentrated(
            gt,
            &sampler(cfg, split_seed(cfg.seed, u64::MAX)),
            cfg.reference_samples,
        )?;
        grid.points
            .par_iter()
            .map(|x| {
                let mut d2: Vec<f64> = reference.iter().map(|s| squared_distance(s, x)).collect();
                lipschitz * kth_distance(&mut d2, mass).powf(cfg.alpha) + c0
            })
            .collect()
    } else {
        vec![f64::INFINITY; grid.len()]
    };
    // predicted correct set: margin - L r^alpha > C0, i.e. margin > bound
    let predicted: Vec<bool> = grid
        .eta
        .iter()
        .zip(&bound)
        .map(|(e, b)| (e - 0.5).abs() > *b)
        .collect();
    let trials: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialOutcome> {
            let train = sample_labeled(
                gt,
                &sampler(cfg, split_seed(cfg.seed, trial as u64)),
                cfg.n,
                "trial",
            )?;
            let model = KnnModel::fit(&train, cfg.k)?;
            let mut sup_error: f64 = 0.0;
            let mut min_slack = f64::INFINITY;
            let mut predicted_set_size = 0;
            let mut predicted_set_error = false;
            for (i, x) in grid.points.iter().enumerate() {
                let eta_hat = model.predict_eta(x)?;
                let err = (eta_hat - grid.eta[i]).abs();
                sup_error = sup_error.max(err);
                min_slack = min_slack.min(bound[i] - err);
                if predicted[i] {
                    predicted_set_size += 1;
                    if model.predict(x) != grid.bayes_label(i) {
                        predicted_set_error = true;
                    }
                }
            }
            Ok(TrialOutcome {
                trial,
                sup_error,
                min_slack,
                violated: min_slack <= 0.0,
                predicted_set_size,
                predicted_set_error,
            })
        })
        .collect::<Result<_>>()?;
    let frac = |f: fn(&TrialOutcome) -> bool| {
        trials.iter().filter(|t| f(t)).count() as f64 / trials.len() as f64
    };
    Ok(VerifyReport {
        config: cfg.clone(),
        c0,
        delta_p,
        lipschitz,
        radius_defined,
        violation_fraction: frac(|t| t.violated),
        predicted_set_failure_fraction: frac(|t| t.predicted_set_error),
        trials,
    })
}

impl VerifyReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("# schema=v1\ntrial,sup_error,min_slack,violated,predicted_set_size,predicted_set_error\n");
        for t in &self.trials {
            writeln!(
                out,
                "{},{:?},{:?},{},{},{}",
                t.trial,
                t.sup_error,
                t.min_slack,
                u8::from(t.violated),
                t.predicted_set_size,
                u8::from(t.predicted_set_error)
            )
            .unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "beta: {}\nn: {}\nk: {}\ndelta: {}\ntrials: {}\nC0: {:.6}\ndelta_p: {:.6}\nLipschitz constant: {:.6}\nradius defined: {}\nviolation fraction: {:.4}\npredicted-set failure fraction: {:.4}\n",
            self.config.beta,
            self.config.n,
            self.config.k,
            self.config.delta,
            self.trials.len(),
            self.c0,
            self.delta_p,
            self.lipschitz,
            self.radius_defined,
            self.violation_fraction,
            self.predicted_set_failure_fraction
        )
    }
}

/// Fraction of grid measure inside the predicted correct set
/// `{ |eta - 1/2| - L r^alpha > C0 }`, with `r` taken under a sample from `mu_beta`.
pub fn thm1_predicted_measure<G: GroundTruth + ?Sized>(
    gt: &G,
    params: &Thm1Params,
    samples: &[Vec<f64>],
    grid: &Grid,
) -> Result<f64> {
    let (c0, dp) = thm1_constants(params)?;
    let mass = params.k as f64 / params.n as f64 + dp;
    if mass > 1.0 || samples.is_empty() {
        return Ok(0.0);
    }
    let _ = gt;
    Ok(grid
        .points
        .par_iter()
        .zip(&grid.eta)
        .zip(&grid.weights)
        .map(|((x, e), w)| {
            let mut d2: Vec<f64> = samples.iter().map(|s| squared_distance(s, x)).collect();
            let r = kth_distance(&mut d2, mass);
            if (e - 0.5).abs() - params.lipschitz * r.powf(params.alpha) > c0 {
                *w
            } else {
                0.0
            }
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepConfig {
    pub betas: Vec<f64>,
    pub n: usize,
    pub seeds: usize,
    pub grid_resolution: usize,
    pub density_floor: f64,
    pub seed: u64,
}

impl Default for BetaSweepConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 1.0, 2.0],
            n: 500,
            seeds: 10,
            grid_resolution: 200,
            density_floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepReport {
    pub estimator: String,
    pub betas: Vec<f64>,
    /// `fractions[b][s]`: correct fraction for beta `b`, seed `s`.
    pub fractions: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub spearman: f64,
}

impl BetaSweepReport {
    pub fn non_decreasing(&self) -> bool {
        self.means.windows(2).all(|w| w[1] >= w[0])
    }
}

/// For every beta and seed: draws a Bernoulli-labeled training set from
/// `mu_beta`, fits each estimator on it and measures the grid correct
/// fraction. All estimators share the training sets.
pub fn beta_monotonicity_experiment<G: GroundTruth + ?Sized>(
    gt: &G,
    estimators: &[ModelSpec],
    cfg: &BetaSweepConfig,
) -> Result<Vec<BetaSweepReport>> {
    if cfg.betas.is_empty() {
        return Err(Error::invalid("beta list is empty"));
    }
    if cfg.seeds == 0 {
        return Err(Error::invalid("need at least one seed"));
    }
    if estimators.is_empty() {
        return Err(Error::invalid("need at least one estimator"));
    }
    let grid = Grid::new(gt, cfg.grid_resolution)?;
    let tasks: Vec<(usize, usize)> = (0..cfg.betas.len())
        .flat_map(|b| (0..cfg.seeds).map(move |s| (b, s)))
        .collect();
    // per task: one correct fraction per estimator
    let results: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(b, s)| -> Result<Vec<f64>> {
            let sampler = BetaSamplerConfig {
                beta: cfg.betas[b],
                density_floor: cfg.density_floor,
                seed: split_seed(cfg.seed, s as u64),
                ..Default::default()
            };
            let train = sample_labeled(gt, &sampler, cfg.n, "sweep")?;
            estimators
                .iter()
                .map(|spec| {
                    let model = spec.fit(&train, split_seed(cfg.seed, s as u64))?;
                    Ok(correctness_on_grid(&model, &grid).correct_fraction)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(e, spec)| {
            let fractions: Vec<Vec<f64>> = (0..cfg.betas.len())
                .map(|b| {
                    (0..cfg.seeds)
                        .map(|s| results[b * cfg.seeds + s][e])
                        .collect()
                })
                .collect();
            let means: Vec<f64> = fractions.iter().map(|f| mean(f)).collect();
            BetaSweepReport {
                estimator: spec.to_string(),
                betas: cfg.betas.clone(),
                spearman: spearman(&cfg.betas, &means),
                fractions,
                means,
            }
        })
        .collect())
}

/// One row per (estimator, beta, seed).
pub fn beta_sweep_csv_string(reports: &[BetaSweepReport]) -> String {
    let mut out = String::from("# schema=v1\nestimator,beta,seed,correct_fraction\n");
    for r in reports {
        for (b, beta) in r.betas.iter().enumerate() {
            for (s, f) in r.fractions[b].iter().enumerate() {
                writeln!(out, "{},{beta:?},{s},{f:?}", r.estimator).unwrap();
            }
        }
    }
    out
}

pub fn beta_sweep_summary(reports: &[BetaSweepReport]) -> String {
    let mut out = String::new();
    for r in reports {
        writeln!(out, "estimator: {}", r.estimator).unwrap();
        for (beta, m) in r.betas.iter().zip(&r.means) {
            writeln!(out, "  beta {beta}: mean correct fraction {m:.6}").unwrap();
        }
        let sign = if r.spearman > 0.0 {
            "positive"
        } else if r.spearman < 0.0 {
            "negative"
        } else {
            "zero"
        };
        writeln!(out, "  spearman: {:.4} ({sign})", r.spearman).unwrap();
        writeln!(out, "  non-decreasing: {}", r.non_decreasing()).unwrap();
    }
    out
}
