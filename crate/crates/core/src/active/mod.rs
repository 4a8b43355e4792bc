//! Train, generate, retrain: a victim model is queried on selected or
//! adversarially perturbed pool points and a shadow model is fitted on the
//! answers.

mod select;

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use select::{
    select_dfal, select_margin, select_max_confidence, select_random, DeepFoolSettings,
};

use crate::attacks::{
    l2_norm, run_attack_in_pool, AdversarialExample, AttackConfig, AttackKind, CountingOracle,
};
use crate::classifiers::{Classifier, FittedClassifier, ModelSpec};
use crate::data::{Dataset, Role};
use crate::error::{check_dim, Error, Result};
use crate::rng::split_seed;

/// How query points are chosen from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    Margin,
    Dfal,
    MaxConfidence,
    /// Random pool points replaced by scaled adversarial examples.
    Adversarial(AttackKind),
    /// Half clean random points, half scaled adversarial copies of them.
    Augmented(AttackKind),
}

impl Strategy {
    pub fn attack(self) -> Option<AttackKind> {
        match self {
            Strategy::Adversarial(k) | Strategy::Augmented(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Random => f.write_str("random"),
            Strategy::Margin => f.write_str("margin"),
            Strategy::Dfal => f.write_str("dfal"),
            Strategy::MaxConfidence => f.write_str("max_confidence"),
            Strategy::Adversarial(k) => write!(f, "{k}"),
            Strategy::Augmented(k) => write!(f, "aug:{k}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// `random`, `margin`, `dfal`, `max_confidence`, an attack name, or `aug:ATTACK`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "random" | "baseline" => Strategy::Random,
            "margin" => Strategy::Margin,
            "dfal" => Strategy::Dfal,
            "max_confidence" | "maxconf" => Strategy::MaxConfidence,
            _ => match s.strip_prefix("aug:") {
                Some(a) => Strategy::Augmented(a.parse()?),
                None => Strategy::Adversarial(s.parse().map_err(|_| {
                    let names: Vec<&str> = AttackKind::ALL.iter().map(|k| k.name()).collect();
                    Error::invalid(format!(
                        "unknown strategy `{s}` (valid: random, margin, dfal, max_confidence, aug:ATTACK, {})",
                        names.join(", ")
                    ))
                })?),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Name written to the report.
    pub dataset: String,
    pub victim: ModelSpec,
    /// Fit seed of the victim; kept apart from `seed` so that every
    /// adversary seed faces the same deployed model.
    pub victim_seed: u64,
    pub shadow: ModelSpec,
    /// Model trained on warm-up labels for DFAL and max-confidence ranking.
    pub surrogate: ModelSpec,
    pub attack: AttackConfig,
    pub strategy: Strategy,
    pub budget: usize,
    pub seed: u64,
    /// Share of the budget spent on random warm-up labels before DFAL or
    /// max-confidence selection.
    pub warmup_fraction: f64,
    /// DFAL perturbation magnitude; when set each selected point is queried
    /// together with an adversarial copy at this L2 distance.
    pub dfal_magnitude: Option<f64>,
    pub deepfool: DeepFoolSettings,
}

impl PipelineConfig {
    pub fn new(
        dataset: impl Into<String>,
        victim: ModelSpec,
        strategy: Strategy,
        budget: usize,
        seed: u64,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            shadow: victim.clone(),
            victim,
            victim_seed: 0,
            surrogate: ModelSpec::mlp_default(),
            attack: AttackConfig::default(),
            strategy,
            budget,
            seed,
            warmup_fraction: 0.5,
            dfal_magnitude: None,
            deepfool: DeepFoolSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid(format!(
                "warm-up fraction must lie in [0, 1], got {}",
                self.warmup_fraction
            )));
        }
        if let Some(e) = self.dfal_magnitude {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::invalid(format!(
                    "perturbation magnitude must be >= 0, got {e}"
                )));
            }
        }
        Ok(())
    }
}

/// The victim's training split, the adversary's pool and the test split.
#[derive(Debug, Clone)]
pub struct PipelineData {
    pub train: Dataset,
    /// Only the feature rows of the pool are ever read.
    pub pool: Dataset,
    pub test: Dataset,
}

impl PipelineData {
    pub fn new(train: Dataset, pool: Dataset, test: Dataset) -> Result<Self> {
        check_dim(train.dim(), pool.dim())?;
        check_dim(train.dim(), test.dim())?;
        if train.num_classes() != test.num_classes() {
            return Err(Error::Consistency(format!(
                "train has {} classes, test has {}",
                train.num_classes(),
                test.num_classes()
            )));
        }
        Ok(Self { train, pool, test })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Clean,
    Adversarial(AttackKind),
}

/// Query points with the labels the victim returned for them.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub provenance: Vec<Provenance>,
    pub queries_used: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_dataset(&self, name: &str, num_classes: usize) -> Result<Dataset> {
        Dataset::from_rows(
            name,
            Role::Train,
            num_classes,
            &self.points,
            self.labels.clone(),
        )
    }
}

/// One pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub dataset: String,
    pub strategy: String,
    pub attack: String,
    pub budget: usize,
    pub seed: u64,
    pub victim_acc: f64,
    pub shadow_acc: f64,
    /// Mean L2 perturbation of the adversarial points that were queried.
    #[serde(rename = "mean_L2")]
    pub mean_l2: Option<f64>,
    /// Label queries behind the shadow's training set.
    pub queries_used: u64,
    /// Victim calls spent inside the attacks themselves (BBox-OPT).
    pub attack_queries: u64,
    /// Selected points whose attack failed and were queried clean instead.
    pub attack_failures: usize,
    pub degenerate: bool,
}

pub const REPORT_CSV_HEADER: &str =
    "dataset,strategy,attack,budget,seed,victim_acc,shadow_acc,mean_L2,queries_used,attack_queries,attack_failures,degenerate";

impl PipelineReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:?},{:?},{},{},{},{},{}",
            self.dataset,
            self.strategy,
            self.attack,
            self.budget,
            self.seed,
            self.victim_acc,
            self.shadow_acc,
            self.mean_l2.map_or(String::new(), |v| format!("{v:?}")),
            self.queries_used,
            self.attack_queries,
            self.attack_failures,
            self.degenerate
        )
    }
}

/// `# schema=v1`, header and one row per report.
pub fn reports_csv_string(reports: &[PipelineReport]) -> String {
    let mut out = format!("# schema=v1\n{REPORT_CSV_HEADER}\n");
    for r in reports {
        writeln!(out, "{}", r.csv_row()).unwrap();
    }
    out
}

/// A fitted victim plus a per-pool-point cache of attack results, shared by
/// every strategy, budget and adversary seed run against it.
pub struct Session<'a> {
    data: &'a PipelineData,
    pool: Vec<Vec<f64>>,
    victim_spec: ModelSpec,
    victim_seed: u64,
    attack: AttackConfig,
    victim: FittedClassifier,
    victim_acc: f64,
    cache: Mutex<HashMap<(AttackKind, usize), Option<AdversarialExample>>>,
}

impl<'a> Session<'a> {
    /// Trains the victim named in `cfg` on `data.train`.
    pub fn new(cfg: &PipelineConfig, data: &'a PipelineData) -> Result<Self> {
        cfg.validate()?;
        let victim = cfg.victim.fit(&data.train, cfg.victim_seed)?;
        let victim_acc = victim.accuracy(&data.test);
        Ok(Self {
            data,
            pool: data.pool.rows().map(<[f64]>::to_vec).collect(),
            victim_spec: cfg.victim.clone(),
            victim_seed: cfg.victim_seed,
            attack: cfg.attack.clone(),
            victim,
            victim_acc,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn victim(&self) -> &FittedClassifier {
        &self.victim
    }

    pub fn victim_accuracy(&self) -> f64 {
        self.victim_acc
    }

    /// Unscaled attack results for pool indices `idx` (`None` where the attack
    /// found nothing), computing the missing ones in parallel. Point `i` is
    /// always attacked with seed `split(attack.seed, i)`.
    pub fn attack_results(
        &self,
        kind: AttackKind,
        idx: &[usize],
    ) -> Result<Vec<Option<AdversarialExample>>> {
        let missing: Vec<usize> = {
            let cache = self.cache.lock().unwrap();
            let mut m: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|i| !cache.contains_key(&(kind, *i)))
                .collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        let cfg = AttackConfig {
            method: kind,
            ..self.attack.clone()
        };
        let fresh = missing
            .par_iter()
            .map(|&i| {
                match run_attack_in_pool(
                    &self.victim,
                    &self.pool[i],
                    &cfg,
                    split_seed(cfg.seed, i as u64),
                    &self.pool,
                ) {
                    Ok(a) => Ok((i, Some(a))),
                    Err(Error::AttackInfeasible(_)) => Ok((i, None)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cache = self.cache.lock().unwrap();
        for (i, a) in fresh {
            cache.insert((kind, i), a);
        }
        Ok(idx.iter().map(|i| cache[&(kind, *i)].clone()).collect())
    }

    /// Runs one configuration; `cfg` must name the session's victim and attack settings.
    pub fn run(&self, cfg: &PipelineConfig) -> Result<PipelineReport> {
        cfg.validate()?;
        if cfg.victim != self.victim_spec
            || cfg.victim_seed != self.victim_seed
            || cfg.attack != self.attack
        {
            return Err(Error::invalid(
                "configuration does not match the session's victim or attack",
            ));
        }
        let test = &self.data.test;
        let mut report = PipelineReport {
            dataset: cfg.dataset.clone(),
            strategy: cfg.strategy.to_string(),
            attack: cfg
                .strategy
                .attack()
                .map_or("none".into(), |k| k.name().into()),
            budget: cfg.budget,
            seed: cfg.seed,
            victim_acc: self.victim_acc,
            shadow_acc: 0.0,
            mean_l2: None,
            queries_used: 0,
            attack_queries: 0,
            attack_failures: 0,
            degenerate: false,
        };
        if cfg.budget > self.pool.len() {
            return Err(Error::invalid(format!(
                "budget {} exceeds pool size {}",
                cfg.budget,
                self.pool.len()
            )));
        }
        if cfg.budget == 0 {
            let maj = test.majority_class();
            report.shadow_acc = if test.is_empty() {
                0.0
            } else {
                test.labels().iter().filter(|&&y| y == maj).count() as f64 / test.len() as f64
            };
            report.degenerate = true;
            return Ok(report);
        }
        let oracle = CountingOracle::new(&self.victim);
        let synth = self.generate(cfg, &oracle, &mut report)?;
        debug_assert_eq!(synth.queries_used, synth.len() as u64);
        report.queries_used = synth.queries_used;
        let train = synth.to_dataset(
            &format!("{}-synthetic", cfg.dataset),
            self.victim.num_classes(),
        )?;
        if train.len() < cfg.shadow.min_train_size() {
            return Err(Error::invalid(format!(
                "shadow `{}` needs at least {} points, got {}",
                cfg.shadow,
                cfg.shadow.min_train_size(),
                train.len()
            )));
        }
        let shadow = cfg.shadow.fit(&train, split_seed(cfg.seed, 2))?;
        report.shadow_acc = shadow.accuracy(test);
        Ok(report)
    }

    fn generate(
        &self,
        cfg: &PipelineConfig,
        oracle: &CountingOracle<'_, FittedClassifier>,
        report: &mut PipelineReport,
    ) -> Result<SyntheticDataset> {
        let mut synth = SyntheticDataset {
            points: Vec::new(),
            labels: Vec::new(),
            provenance: Vec::new(),
            queries_used: 0,
        };
        let push = |synth: &mut SyntheticDataset, x: Vec<f64>, p: Provenance| {
            synth.labels.push(oracle.query(&x));
            synth.points.push(x);
            synth.provenance.push(p);
            synth.queries_used = oracle.queries();
        };
        let select_seed = split_seed(cfg.seed, 0);
        let mut l2 = Vec::new();
        match cfg.strategy {
            Strategy::Random => {
                for i in select_random(self.pool.len(), cfg.budget, select_seed)? {
                    push(&mut synth, self.pool[i].clone(), Provenance::Clean);
                }
            }
            Strategy::Margin => {
                for i in select_margin(&self.pool, &self.victim, cfg.budget)? {
                    push(&mut synth, self.pool[i].clone(), Provenance::Clean);
                }
            }
            Strategy::Dfal | Strategy::MaxConfidence => {
                let order = select_random(self.pool.len(), self.pool.len(), select_seed)?;
                let warm = ((cfg.budget as f64 * cfg.warmup_fraction).round() as usize)
                    .clamp(1, cfg.budget);
                for &i in &order[..warm] {
                    push(&mut synth, self.pool[i].clone(), Provenance::Clean);
                }
                let rest = &order[warm..];
                let remaining = cfg.budget - warm;
                let pool: Vec<Vec<f64>> = rest.iter().map(|&i| self.pool[i].clone()).collect();
                let warm_set = synth.to_dataset("warm-up", self.victim.num_classes())?;
                let surrogate = cfg.surrogate.fit(&warm_set, split_seed(cfg.seed, 1))?;
                let model = surrogate.as_differentiable().ok_or_else(|| {
                    Error::Unsupported(format!("surrogate `{}` has no gradient", cfg.surrogate))
                })?;
                if cfg.strategy == Strategy::MaxConfidence {
                    for j in select_max_confidence(&pool, model, remaining, cfg.deepfool)? {
                        push(&mut synth, pool[j].clone(), Provenance::Clean);
                    }
                } else {
                    let take = if cfg.dfal_magnitude.is_some() {
                        remaining / 2
                    } else {
                        remaining
                    };
                    let (chosen, advs) =
                        select_dfal(&pool, model, take, cfg.dfal_magnitude, cfg.deepfool)?;
                    for (j, adv) in chosen.into_iter().zip(advs) {
                        push(&mut synth, pool[j].clone(), Provenance::Clean);
                        if cfg.dfal_magnitude.is_some() {
                            l2.push(adv.perturbation_l2);
                            push(
                                &mut synth,
                                adv.perturbed,
                                Provenance::Adversarial(AttackKind::DeepFool),
                            );
                        }
                    }
                }
            }
            Strategy::Adversarial(kind) | Strategy::Augmented(kind) => {
                let augmented = matches!(cfg.strategy, Strategy::Augmented(_));
                let n_clean = if augmented {
                    cfg.budget - cfg.budget / 2
                } else {
                    cfg.budget
                };
                let idx = select_random(self.pool.len(), n_clean, select_seed)?;
                let n_adv = if augmented { cfg.budget / 2 } else { n_clean };
                let advs = self.attack_results(kind, &idx[..n_adv])?;
                if augmented {
                    for &i in &idx {
                        push(&mut synth, self.pool[i].clone(), Provenance::Clean);
                    }
                }
                for (&i, adv) in idx.iter().zip(advs) {
                    let Some(adv) = adv else {
                        report.attack_failures += 1;
                        if !augmented {
                            push(&mut synth, self.pool[i].clone(), Provenance::Clean);
                        }
                        continue;
                    };
                    report.attack_queries += adv.queries_used;
                    let s = self.attack.scale;
                    let x: Vec<f64> = adv
                        .original
                        .iter()
                        .zip(&adv.perturbed)
                        .map(|(o, p)| o + s * (p - o))
                        .collect();
                    let d: Vec<f64> = x.iter().zip(&adv.original).map(|(a, b)| a - b).collect();
                    l2.push(l2_norm(&d));
                    push(&mut synth, x, Provenance::Adversarial(kind));
                }
            }
        }
        if !l2.is_empty() {
            report.mean_l2 = Some(l2.iter().sum::<f64>() / l2.len() as f64);
        }
        Ok(synth)
    }
}

/// Trains the victim, generates queries per `cfg.strategy`, and retrains the shadow.
pub fn run_pipeline(cfg: &PipelineConfig, data: &PipelineData) -> Result<PipelineReport> {
    Session::new(cfg, data)?.run(cfg)
}
