//! Adversarial example generators.
//!
//! Every attack returns an [`AdversarialExample`] whose `success` flag is
//! `victim(perturbed) != victim(original)` for the classifier it was run against.

mod blackbox;
mod gradient;
mod knn;

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use blackbox::{bbox_distance, bbox_opt_attack, bbox_opt_attack_from, BboxConfig};
pub use gradient::{cw_l2, deepfool, fgsm, pgd, CwConfig};
pub use knn::{
    direct_attack, direct_search_attack, dykstra_project, kernel_substitute_attack,
    nearest_opposite_distance, rba_attack, Halfspace, KernelSubstitute,
};

use crate::classifiers::{squared_distance, Classifier, FittedClassifier};
use crate::error::{Error, Result};
use crate::persist::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Direct,
    RbaApprox,
    RbaExact,
    KernelSub,
    Bbox,
    Fgsm,
    Pgd,
    DeepFool,
    Cw,
}

impl AttackKind {
    pub const ALL: [AttackKind; 9] = [
        AttackKind::Direct,
        AttackKind::RbaApprox,
        AttackKind::RbaExact,
        AttackKind::KernelSub,
        AttackKind::Bbox,
        AttackKind::Fgsm,
        AttackKind::Pgd,
        AttackKind::DeepFool,
        AttackKind::Cw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Direct => "direct",
            AttackKind::RbaApprox => "rba",
            AttackKind::RbaExact => "rba_exact",
            AttackKind::KernelSub => "kernel_sub",
            AttackKind::Bbox => "bbox",
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::DeepFool => "deepfool",
            AttackKind::Cw => "cw",
        }
    }

    /// White-box attacks on a k-NN victim.
    pub fn needs_knn(self) -> bool {
        matches!(
            self,
            AttackKind::Direct
                | AttackKind::RbaApprox
                | AttackKind::RbaExact
                | AttackKind::KernelSub
        )
    }

    /// Attacks that need the gradient of a differentiable model.
    pub fn needs_gradient(self) -> bool {
        matches!(
            self,
            AttackKind::Fgsm | AttackKind::Pgd | AttackKind::DeepFool | AttackKind::Cw
        )
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "rba_approx" {
            return Ok(AttackKind::RbaApprox);
        }
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = AttackKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!(
                    "unknown attack `{s}` (valid: {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialExample {
    pub original: Vec<f64>,
    pub perturbed: Vec<f64>,
    pub perturbation_l2: f64,
    pub perturbation_linf: f64,
    pub attack: AttackKind,
    pub original_label: usize,
    pub perturbed_label: usize,
    pub success: bool,
    pub queries_used: u64,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl AdversarialExample {
    /// Computes norms and labels from the two points; `victim` is queried twice
    /// and those calls are not counted in `queries_used`.
    pub fn new<C: Classifier + ?Sized>(
        victim: &C,
        original: Vec<f64>,
        perturbed: Vec<f64>,
        attack: AttackKind,
        queries_used: u64,
    ) -> Self {
        let d = diff(&perturbed, &original);
        let original_label = victim.predict(&original);
        let perturbed_label = victim.predict(&perturbed);
        Self {
            perturbation_l2: l2_norm(&d),
            perturbation_linf: linf_norm(&d),
            success: original_label != perturbed_label,
            original,
            perturbed,
            attack,
            original_label,
            perturbed_label,
            queries_used,
        }
    }

    pub fn perturbation(&self) -> Vec<f64> {
        diff(&self.perturbed, &self.original)
    }

    /// Whether the stored norms agree with the points within `tol`.
    pub fn norms_consistent(&self, tol: f64) -> bool {
        let d = self.perturbation();
        (l2_norm(&d) - self.perturbation_l2).abs() <= tol
            && (linf_norm(&d) - self.perturbation_linf).abs() <= tol
    }
}

/// `original + scale * (perturbed - original)` with norms and success
/// re-evaluated against `victim`.
pub fn scale_perturbation<C: Classifier + ?Sized>(
    adv: &AdversarialExample,
    scale: f64,
    victim: &C,
) -> Result<AdversarialExample> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "scale must be non-negative, got {scale}"
        )));
    }
    let perturbed = if scale == 1.0 {
        adv.perturbed.clone()
    } else {
        adv.original
            .iter()
            .zip(&adv.perturbed)
            .map(|(o, p)| o + scale * (p - o))
            .collect()
    };
    Ok(AdversarialExample::new(
        victim,
        adv.original.clone(),
        perturbed,
        adv.attack,
        adv.queries_used,
    ))
}

/// Label oracle that counts every prediction it serves.
pub struct CountingOracle<'a, C: ?Sized> {
    inner: &'a C,
    count: AtomicU64,
}

impl<'a, C: Classifier + ?Sized> CountingOracle<'a, C> {
    pub fn new(inner: &'a C) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn queries(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn query(&self, x: &[f64]) -> usize {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(x)
    }
}

impl<C: Classifier + ?Sized> Classifier for CountingOracle<'_, C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn predict(&self, x: &[f64]) -> usize {
        self.query(x)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.score(x)
    }
}

/// Settings shared by the attack dispatcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub method: AttackKind,
    /// Step size for FGSM / kernel substitute, ball radius for PGD.
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    /// Candidate cells examined by approximate RBA.
    pub candidates: usize,
    /// Direct-attack radius as a multiple of half the distance to the nearest
    /// opposite-label point; `None` bisects for the smallest flipping radius.
    pub direct_factor: Option<f64>,
    /// Bandwidth `c` of the kernel substitute.
    pub kernel_c: f64,
    pub overshoot: f64,
    pub max_iter: usize,
    pub cw: CwConfig,
    pub bbox: BboxConfig,
    pub scale: f64,
    pub clip_unit_box: bool,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            method: AttackKind::RbaApprox,
            epsilon: 0.15,
            steps: 10,
            step_size: 0.03,
            candidates: 10,
            direct_factor: None,
            kernel_c: 0.05,
            overshoot: 0.02,
            max_iter: 50,
            cw: CwConfig::default(),
            bbox: BboxConfig::default(),
            scale: 0.9,
            clip_unit_box: false,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.steps == 0 || self.max_iter == 0 {
            return Err(Error::invalid("steps and max_iter must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.scale) {
            return Err(Error::invalid(format!(
                "scale must lie in [0, 1], got {}",
                self.scale
            )));
        }
        if self.candidates == 0 {
            return Err(Error::invalid("candidate set size must be at least 1"));
        }
        if !(self.kernel_c > 0.0) {
            return Err(Error::invalid("kernel bandwidth c must be positive"));
        }
        self.bbox.validate()?;
        self.cw.validate()
    }
}

/// Runs `cfg.method` against `victim` at `x`. The attacked label is the
/// victim's own prediction at `x`; `seed` only matters for BBox-OPT.
pub fn run_attack(
    victim: &FittedClassifier,
    x: &[f64],
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AdversarialExample> {
    run_attack_in_pool(victim, x, cfg, seed, &[])
}

/// [`run_attack`] for an attacker holding the unlabeled points `pool`:
/// BBox-OPT starts from the directions towards the `cfg.bbox.anchors`
/// nearest pool points the victim labels differently from `x`.
pub fn run_attack_in_pool(
    victim: &FittedClassifier,
    x: &[f64],
    cfg: &AttackConfig,
    seed: u64,
    pool: &[Vec<f64>],
) -> Result<AdversarialExample> {
    let kind = cfg.method;
    let unsupported = || {
        Error::Unsupported(format!(
            "attack `{kind}` cannot target a {} victim",
            victim.kind()
        ))
    };
    if kind.needs_knn() {
        let knn = victim.as_knn().ok_or_else(unsupported)?;
        return match kind {
            AttackKind::Direct => {
                let mut adv = match cfg.direct_factor {
                    Some(f) => direct_attack(knn, x, f * nearest_opposite_distance(knn, x)? / 2.0)?,
                    None => direct_search_attack(knn, x)?,
                };
                if cfg.clip_unit_box {
                    clip01(&mut adv.perturbed);
                    adv = AdversarialExample::new(knn, adv.original, adv.perturbed, kind, 0);
                }
                Ok(adv)
            }
            AttackKind::RbaApprox => rba_attack(knn, x, cfg.candidates, false),
            AttackKind::RbaExact => rba_attack(knn, x, cfg.candidates, true),
            _ => kernel_substitute_attack(knn, x, cfg.epsilon, cfg.kernel_c, cfg.clip_unit_box),
        };
    }
    let y = victim.predict(x);
    if kind == AttackKind::Bbox {
        let pool = if cfg.bbox.anchors == 0 { &[][..] } else { pool };
        let mut near: Vec<(f64, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, x), i))
            .filter(|(d, _)| *d > 0.0)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let candidates: Vec<&[f64]> = near.iter().map(|&(_, i)| pool[i].as_slice()).collect();
        return bbox_opt_attack_from(victim, x, y, &cfg.bbox, seed, &candidates);
    }
    let model = victim.as_differentiable().ok_or_else(unsupported)?;
    match kind {
        AttackKind::Fgsm => fgsm(model, x, y, cfg.epsilon, cfg.clip_unit_box),
        AttackKind::Pgd => pgd(
            model,
            x,
            y,
            cfg.epsilon,
            cfg.step_size,
            cfg.steps,
            cfg.clip_unit_box,
        ),
        AttackKind::DeepFool => deepfool(model, x, cfg.overshoot, cfg.max_iter, cfg.clip_unit_box),
        _ => cw_l2(model, x, y, None, &cfg.cw),
    }
}

const CSV_SCHEMA: &str = "# schema=v1";

/// One row per example: original coordinates, perturbed coordinates, attack,
/// norms, victim labels and success.
pub fn adversarial_csv_string(examples: &[AdversarialExample]) -> String {
    let d = examples.first().map_or(0, |e| e.original.len());
    let mut out = Vec::new();
    writeln!(out, "{CSV_SCHEMA}").unwrap();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend((0..d).map(|i| format!("adv{i}")));
    header.extend(
        [
            "attack",
            "l2",
            "linf",
            "victim_label",
            "adv_label",
            "success",
            "queries",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    writeln!(out, "{}", header.join(",")).unwrap();
    for e in examples {
        let mut row: Vec<String> = e
            .original
            .iter()
            .chain(&e.perturbed)
            .map(|v| format!("{v:?}"))
            .collect();
        row.push(e.attack.to_string());
        row.push(format!("{:?}", e.perturbation_l2));
        row.push(format!("{:?}", e.perturbation_linf));
        row.push(e.original_label.to_string());
        row.push(e.perturbed_label.to_string());
        row.push(e.success.to_string());
        row.push(e.queries_used.to_string());
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    String::from_utf8(out).unwrap()
}

pub fn write_adversarial_csv(
    examples: &[AdversarialExample],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path.as_ref(), adversarial_csv_string(examples).as_bytes())
}

fn clip01(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}
