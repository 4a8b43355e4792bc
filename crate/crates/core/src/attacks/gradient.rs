//! Gradient attacks on differentiable models.

use serde::{Deserialize, Serialize};

use crate::attacks::knn::sign;
use crate::attacks::{clip01, l2_norm, AdversarialExample, AttackKind};
use crate::error::{check_dim, Error, Result};
use crate::neural::{argmax, DifferentiableModel};

fn check_input<M: DifferentiableModel + ?Sized>(model: &M, x: &[f64], y: usize) -> Result<()> {
    check_dim(model.dim(), x.len())?;
    if y >= model.num_classes() {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            model.num_classes()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// `x + epsilon * sign(grad_x loss(x, y))`, optionally clipped to `[0, 1]^d`.
pub fn fgsm<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &[f64],
    y: usize,
    epsilon: f64,
    clip_unit_box: bool,
) -> Result<AdversarialExample> {
    check_input(model, x, y)?;
    check_epsilon(epsilon)?;
    let g = model.loss_gradient(x, y);
    let mut perturbed: Vec<f64> = x
        .iter()
        .zip(&g)
        .map(|(a, b)| a + epsilon * sign(*b))
        .collect();
    if clip_unit_box {
        clip01(&mut perturbed);
    }
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        perturbed,
        AttackKind::Fgsm,
        0,
    ))
}

/// All PGD iterates `x^1..x^steps` (the start point `x^0 = x` excluded).
pub fn pgd_iterates<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &[f64],
    y: usize,
    epsilon: f64,
    step_size: f64,
    steps: usize,
    clip_unit_box: bool,
) -> Result<Vec<Vec<f64>>> {
    check_input(model, x, y)?;
    check_epsilon(epsilon)?;
    if steps == 0 {
        return Err(Error::invalid("PGD needs at least one step"));
    }
    if !(step_size >= 0.0 && step_size.is_finite()) {
        return Err(Error::invalid(format!(
            "step size must be >= 0, got {step_size}"
        )));
    }
    let mut cur = x.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let g = model.loss_gradient(&cur, y);
        for ((c, gi), xi) in cur.iter_mut().zip(&g).zip(x) {
            *c = (*c + step_size * sign(*gi)).clamp(xi - epsilon, xi + epsilon);
        }
        if clip_unit_box {
            clip01(&mut cur);
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Projected signed-gradient ascent inside the `l_inf` ball of radius `epsilon`.
pub fn pgd<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &[f64],
    y: usize,
    epsilon: f64,
    step_size: f64,
    steps: usize,
    clip_unit_box: bool,
) -> Result<AdversarialExample> {
    let last = pgd_iterates(model, x, y, epsilon, step_size, steps, clip_unit_box)?
        .pop()
        .expect("at least one step");
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        last,
        AttackKind::Pgd,
        0,
    ))
}

/// Extra distance added to every linearized step so the iterate lands just past
/// the estimated boundary rather than on it.
pub const DEEPFOOL_NUDGE: f64 = 1e-9;

/// Iterated linearization: each step moves to the nearest linearized class
/// boundary `|f_k| / |w_k|`; the accumulated perturbation is scaled by
/// `1 + overshoot`. Stops at the first label change or after `max_iter` steps.
pub fn deepfool<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &[f64],
    overshoot: f64,
    max_iter: usize,
    clip_unit_box: bool,
) -> Result<AdversarialExample> {
    check_dim(model.dim(), x.len())?;
    if !(overshoot >= 0.0) {
        return Err(Error::invalid(format!(
            "overshoot must be >= 0, got {overshoot}"
        )));
    }
    let classes = model.num_classes();
    let k0 = argmax(&model.logits(x));
    let mut total = vec![0.0; x.len()];
    let mut cur = x.to_vec();
    for _ in 0..max_iter {
        let z = model.logits(&cur);
        if argmax(&z) != k0 {
            break;
        }
        let mut step: Option<(f64, Vec<f64>)> = None;
        for k in (0..classes).filter(|&k| k != k0) {
            let mut up = vec![0.0; classes];
            up[k] = 1.0;
            up[k0] = -1.0;
            let w = model.logit_vjp(&cur, &up);
            let norm = l2_norm(&w);
            if norm == 0.0 {
                continue;
            }
            let dist = (z[k] - z[k0]).abs() / norm;
            if step.as_ref().is_none_or(|s| dist < s.0) {
                let dir = w.into_iter().map(|v| v / norm).collect();
                step = Some((dist, dir));
            }
        }
        let Some((dist, dir)) = step else {
            break;
        };
        for (t, d) in total.iter_mut().zip(&dir) {
            *t += (dist + DEEPFOOL_NUDGE) * d;
        }
        cur = x
            .iter()
            .zip(&total)
            .map(|(a, t)| a + (1.0 + overshoot) * t)
            .collect();
    }
    if clip_unit_box {
        clip01(&mut cur);
    }
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        cur,
        AttackKind::DeepFool,
        0,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub search_steps: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub kappa: f64,
}

impl Default for CwConfig {
    fn default() -> Self {
        Self {
            c_min: 1e-3,
            c_max: 1e2,
            search_steps: 9,
            iterations: 200,
            learning_rate: 1e-2,
            kappa: 0.0,
        }
    }
}

impl CwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min > 0.0 && self.c_max >= self.c_min && self.c_max.is_finite()) {
            return Err(Error::invalid("C&W needs 0 < c_min <= c_max"));
        }
        if self.search_steps == 0 || self.iterations == 0 {
            return Err(Error::invalid(
                "C&W needs at least one search step and one iteration",
            ));
        }
        if !(self.learning_rate > 0.0 && self.kappa >= 0.0) {
            return Err(Error::invalid(
                "C&W needs a positive learning rate and kappa >= 0",
            ));
        }
        Ok(())
    }
}

/// Keeps `atanh` finite at the box edges.
const CW_SHRINK: f64 = 1.0 - 1e-6;

/// Carlini-Wagner L2 attack in the `tanh` change of variables
/// `x' = (tanh(w) + 1) / 2`, minimizing `|x' - x|^2 + c f(x')` with Adam and a
/// geometric bisection over `c`. Untargeted against label `y` unless `target`
/// is given.
pub fn cw_l2<M: DifferentiableModel + ?Sized>(
    model: &M,
    x: &[f64],
    y: usize,
    target: Option<usize>,
    cfg: &CwConfig,
) -> Result<AdversarialExample> {
    check_input(model, x, y)?;
    cfg.validate()?;
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("C&W requires inputs inside [0, 1]^d"));
    }
    if let Some(t) = target {
        check_input(model, x, t)?;
    }
    let reached = |z: &[f64]| match target {
        Some(t) => argmax(z) == t,
        None => argmax(z) != y,
    };
    if reached(&model.logits(x)) {
        return Ok(AdversarialExample::new(
            model,
            x.to_vec(),
            x.to_vec(),
            AttackKind::Cw,
            0,
        ));
    }
    let classes = model.num_classes();
    let w0: Vec<f64> = x
        .iter()
        .map(|v| ((2.0 * v - 1.0) * CW_SHRINK).atanh())
        .collect();
    let (mut lo, mut hi) = (cfg.c_min, cfg.c_max);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last = x.to_vec();
    for _ in 0..cfg.search_steps {
        let c = (lo * hi).sqrt();
        let mut found = false;
        let mut w = w0.clone();
        let mut m = vec![0.0; w.len()];
        let mut v = vec![0.0; w.len()];
        let (b1, b2) = (0.9f64, 0.999f64);
        for it in 1..=cfg.iterations {
            let t: Vec<f64> = w.iter().map(|wi| wi.tanh()).collect();
            let xp: Vec<f64> = t.iter().map(|ti| 0.5 * (ti + 1.0)).collect();
            let z = model.logits(&xp);
            if reached(&z) {
                let d = xp
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                found = true;
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, xp.clone()));
                }
            }
            // margin term: (other - target) for targeted, (y - best other) otherwise
            let (pos, neg) = match target {
                Some(tc) => (best_other(&z, tc), tc),
                None => (y, best_other(&z, y)),
            };
            let mut grad: Vec<f64> = xp.iter().zip(x).map(|(a, b)| 2.0 * (a - b)).collect();
            if z[pos] - z[neg] > -cfg.kappa {
                let mut up = vec![0.0; classes];
                up[pos] = c;
                up[neg] = -c;
                for (g, h) in grad.iter_mut().zip(model.logit_vjp(&xp, &up)) {
                    *g += h;
                }
            }
            for i in 0..w.len() {
                let gw = grad[i] * 0.5 * (1.0 - t[i] * t[i]);
                m[i] = b1 * m[i] + (1.0 - b1) * gw;
                v[i] = b2 * v[i] + (1.0 - b2) * gw * gw;
                let mh = m[i] / (1.0 - b1.powi(it as i32));
                let vh = v[i] / (1.0 - b2.powi(it as i32));
                w[i] -= cfg.learning_rate * mh / (vh.sqrt() + 1e-8);
            }
            last = xp;
        }
        if found {
            hi = c;
        } else {
            lo = c;
        }
    }
    let perturbed = best.map_or(last, |b| b.1);
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        perturbed,
        AttackKind::Cw,
        0,
    ))
}

fn best_other(z: &[f64], skip: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in z.iter().enumerate() {
        if i != skip && (best == usize::MAX || v > z[best]) {
            best = i;
        }
    }
    best
}
