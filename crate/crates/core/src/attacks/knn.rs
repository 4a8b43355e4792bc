//! White-box attacks on nearest-neighbour victims.

use crate::attacks::{clip01, l2_norm, AdversarialExample, AttackKind};
use crate::classifiers::{squared_distance, Classifier, KnnModel, Neighbor};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

fn nearest_opposite(model: &KnnModel, x: &[f64]) -> Result<(usize, Neighbor)> {
    let label = model.predict(x);
    let nb = model.nearest_other_label(x, label).ok_or_else(|| {
        Error::AttackInfeasible(format!("no training point with a label other than {label}"))
    })?;
    Ok((label, nb))
}

/// Moves `x` a distance `r` towards its nearest training point whose label
/// differs from the victim's prediction at `x`.
pub fn direct_attack(model: &KnnModel, x: &[f64], r: f64) -> Result<AdversarialExample> {
    check_dim(model.dim(), x.len())?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("radius must be >= 0, got {r}")));
    }
    let (_, nb) = nearest_opposite(model, x)?;
    let target = model.train().row(nb.index);
    let dist = nb.sq_dist.sqrt();
    let perturbed = if dist == 0.0 || r == 0.0 {
        x.to_vec()
    } else {
        x.iter()
            .zip(target)
            .map(|(a, b)| a + r * (b - a) / dist)
            .collect()
    };
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        perturbed,
        AttackKind::Direct,
        0,
    ))
}

/// Relative bisection tolerance of [`direct_search_attack`].
pub const DIRECT_SEARCH_TOL: f64 = 1e-6;

/// Direct attack with the radius found by bisection on the segment from `x`
/// to its nearest opposite-label training point: the returned point is the
/// label-changing end of the final bracket.
pub fn direct_search_attack(model: &KnnModel, x: &[f64]) -> Result<AdversarialExample> {
    check_dim(model.dim(), x.len())?;
    let (label, nb) = nearest_opposite(model, x)?;
    let target = model.train().row(nb.index);
    let dist = nb.sq_dist.sqrt();
    let at = |r: f64| -> Vec<f64> {
        x.iter()
            .zip(target)
            .map(|(a, b)| a + r * (b - a) / dist)
            .collect()
    };
    if dist == 0.0 || model.predict(target) == label {
        return direct_attack(model, x, dist);
    }
    let (mut lo, mut hi) = (0.0, dist);
    while hi - lo > DIRECT_SEARCH_TOL * dist {
        let mid = 0.5 * (lo + hi);
        if model.predict(&at(mid)) == label {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    direct_attack(model, x, hi)
}

/// Distance from `x` to its nearest opposite-label training point.
pub fn nearest_opposite_distance(model: &KnnModel, x: &[f64]) -> Result<f64> {
    Ok(nearest_opposite(model, x)?.1.sq_dist.sqrt())
}

/// `normal . z <= offset`
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn violation(&self, z: &[f64]) -> f64 {
        dot(&self.normal, z) - self.offset
    }

    fn project(&self, y: &mut [f64]) {
        let v = self.violation(y);
        if v > 0.0 {
            let s = v / dot(&self.normal, &self.normal);
            for (yi, ai) in y.iter_mut().zip(&self.normal) {
                *yi -= s * ai;
            }
        }
    }

    /// Points at least as close to `a` as to `b`.
    fn bisector(a: &[f64], b: &[f64]) -> Self {
        Self {
            normal: b.iter().zip(a).map(|(p, q)| p - q).collect(),
            offset: (dot(b, b) - dot(a, a)) / 2.0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub const DYKSTRA_TOL: f64 = 1e-8;
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

/// Euclidean projection of `x` onto the intersection of `halfspaces` by
/// Dykstra's alternating projections.
pub fn dykstra_project(
    x: &[f64],
    halfspaces: &[Halfspace],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let mut z = x.to_vec();
    if halfspaces.iter().all(|h| h.violation(&z) <= 0.0) {
        return Ok(z);
    }
    let d = x.len();
    let mut increments = vec![vec![0.0; d]; halfspaces.len()];
    let mut y = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let mut moved = 0.0;
        for (h, p) in halfspaces.iter().zip(increments.iter_mut()) {
            for i in 0..d {
                y[i] = z[i] + p[i];
            }
            let before = y.clone();
            h.project(&mut y);
            for i in 0..d {
                p[i] = before[i] - y[i];
                moved += (y[i] - z[i]) * (y[i] - z[i]);
                z[i] = y[i];
            }
        }
        let worst = halfspaces
            .iter()
            .map(|h| h.violation(&z) / l2_norm(&h.normal))
            .fold(0.0, f64::max);
        residual = moved.sqrt().max(worst);
        if residual <= tol {
            return Ok(z);
        }
    }
    Err(Error::Numeric(format!(
        "Dykstra projection did not converge in {max_sweeps} sweeps (residual {residual:.3e})"
    )))
}

/// Constraints added per round of constraint generation.
const CUTS_PER_ROUND: usize = 8;

/// Projection of `x` onto the Voronoi cell of training point `j`, adding
/// bisector constraints only as the current iterate violates them.
fn project_onto_cell(train: &Dataset, j: usize, x: &[f64]) -> Result<Vec<f64>> {
    let xj = train.row(j);
    let mut active: Vec<Halfspace> = Vec::new();
    let mut used = vec![false; train.len()];
    used[j] = true;
    let mut z = x.to_vec();
    loop {
        let mut violated: Vec<(f64, usize)> = Vec::new();
        for (i, xi) in train.rows().enumerate() {
            if used[i] {
                continue;
            }
            let h = Halfspace::bisector(xj, xi);
            let norm = l2_norm(&h.normal);
            if norm == 0.0 {
                // duplicate of x_j: the constraint is vacuous
                used[i] = true;
                continue;
            }
            let v = h.violation(&z) / norm;
            if v > DYKSTRA_TOL {
                violated.push((v, i));
            }
        }
        if violated.is_empty() {
            return Ok(z);
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violated.iter().take(CUTS_PER_ROUND) {
            used[i] = true;
            active.push(Halfspace::bisector(xj, train.row(i)));
        }
        z = dykstra_project(x, &active, DYKSTRA_TOL * 1e-1, DYKSTRA_MAX_SWEEPS)?;
    }
}

/// Offset applied towards the target training point so the returned example
/// lies strictly inside its Voronoi cell.
pub const RBA_INSIDE_OFFSET: f64 = 1e-6;

/// Largest training set for which exact RBA enumerates every candidate cell.
pub const RBA_EXACT_MAX_TRAIN: usize = 500;

/// Region-based attack on a 1-NN victim: the closest point of any Voronoi cell
/// whose training label differs from the victim's prediction at `x`.
/// Examines the `m` nearest such cells, or all of them when `exact`.
pub fn rba_attack(
    model: &KnnModel,
    x: &[f64],
    m: usize,
    exact: bool,
) -> Result<AdversarialExample> {
    check_dim(model.dim(), x.len())?;
    if model.k() != 1 {
        return Err(Error::Unsupported(format!(
            "region-based attack needs a 1-NN victim, got k = {}",
            model.k()
        )));
    }
    let train = model.train();
    if exact && train.len() > RBA_EXACT_MAX_TRAIN {
        return Err(Error::Unsupported(format!(
            "exact region-based attack is limited to {RBA_EXACT_MAX_TRAIN} training points"
        )));
    }
    if !exact && m == 0 {
        return Err(Error::invalid("candidate set size must be at least 1"));
    }
    let label = model.predict(x);
    let count = if exact { train.len() } else { m };
    let candidates = model.nearest_where(x, count, |y| y != label);
    if candidates.is_empty() {
        return Err(Error::AttackInfeasible(format!(
            "no training point with a label other than {label}"
        )));
    }
    let own = model.neighbors(x)[0].index;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stalled = None;
    for c in &candidates {
        let xj = train.row(c.index);
        // the bisector against x's own nearest neighbour bounds the distance to the cell
        let h = Halfspace::bisector(xj, train.row(own));
        let norm = l2_norm(&h.normal);
        if norm > 0.0 {
            let lower = h.violation(x) / norm;
            if best.as_ref().is_some_and(|(d, _)| lower >= *d) {
                continue;
            }
        }
        // a cell whose projection stalls is skipped; the others still compete
        let z = match project_onto_cell(train, c.index, x) {
            Ok(z) => z,
            Err(e @ Error::Numeric(_)) => {
                stalled = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let to_target: Vec<f64> = xj.iter().zip(&z).map(|(a, b)| a - b).collect();
        let len = l2_norm(&to_target);
        let pushed: Vec<f64> = if len > 0.0 {
            z.iter()
                .zip(&to_target)
                .map(|(p, t)| p + RBA_INSIDE_OFFSET * t / len)
                .collect()
        } else {
            z
        };
        let dist = squared_distance(&pushed, x).sqrt();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, pushed));
        }
    }
    let Some((_, perturbed)) = best else {
        return Err(stalled.expect("every candidate was either projected or stalled"));
    };
    let kind = if exact {
        AttackKind::RbaExact
    } else {
        AttackKind::RbaApprox
    };
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        perturbed,
        kind,
        0,
    ))
}

/// Differentiable stand-in for a k-NN classifier:
/// `f(x)_c = sum_z softmax_z(-|z - x|^2 / c) [y_z = c]` over the training points.
#[derive(Debug, Clone, Copy)]
pub struct KernelSubstitute<'a> {
    train: &'a Dataset,
    c: f64,
}

fn log_sum_exp_iter(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl<'a> KernelSubstitute<'a> {
    pub fn new(train: &'a Dataset, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!(
                "kernel bandwidth c must be positive, got {c}"
            )));
        }
        if train.is_empty() {
            return Err(Error::invalid("kernel substitute needs training points"));
        }
        Ok(Self { train, c })
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.train
            .rows()
            .map(|z| -squared_distance(z, x) / self.c)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scores(x);
        let total = log_sum_exp_iter(s.iter().copied());
        let mut p = vec![0.0; self.train.num_classes()];
        for (si, &y) in s.iter().zip(self.train.labels()) {
            p[y] += (si - total).exp();
        }
        p
    }

    /// `-log f(x)_y`
    pub fn loss(&self, x: &[f64], y: usize) -> f64 {
        let s = self.scores(x);
        let labels = self.train.labels();
        let own = log_sum_exp_iter(
            s.iter()
                .zip(labels)
                .filter(|(_, &l)| l == y)
                .map(|(v, _)| *v),
        );
        log_sum_exp_iter(s.iter().copied()) - own
    }

    /// Analytic gradient of [`KernelSubstitute::loss`] with respect to `x`.
    pub fn loss_gradient(&self, x: &[f64], y: usize) -> Vec<f64> {
        let s = self.scores(x);
        let labels = self.train.labels();
        let d = x.len();
        let mut g = vec![0.0; d];
        if !labels.contains(&y) {
            return g;
        }
        let total = log_sum_exp_iter(s.iter().copied());
        let own = log_sum_exp_iter(
            s.iter()
                .zip(labels)
                .filter(|(_, &l)| l == y)
                .map(|(v, _)| *v),
        );
        // grad s_z = 2 (z - x) / c; loss gradient = E_w[grad s] - E_{w | y}[grad s]
        for ((z, si), &l) in self.train.rows().zip(&s).zip(labels) {
            let mut coef = (si - total).exp();
            if l == y {
                coef -= (si - own).exp();
            }
            if coef == 0.0 {
                continue;
            }
            let k = 2.0 * coef / self.c;
            for i in 0..d {
                g[i] += k * (z[i] - x[i]);
            }
        }
        g
    }
}

/// One signed-gradient step of size `epsilon` on the kernel substitute's
/// cross-entropy at the victim's label, evaluated against the k-NN victim.
pub fn kernel_substitute_attack(
    model: &KnnModel,
    x: &[f64],
    epsilon: f64,
    c: f64,
    clip_unit_box: bool,
) -> Result<AdversarialExample> {
    check_dim(model.dim(), x.len())?;
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let sub = KernelSubstitute::new(model.train(), c)?;
    let y = model.predict(x);
    let g = sub.loss_gradient(x, y);
    let mut perturbed: Vec<f64> = x
        .iter()
        .zip(&g)
        .map(|(xi, gi)| xi + epsilon * sign(*gi))
        .collect();
    if clip_unit_box {
        clip01(&mut perturbed);
    }
    Ok(AdversarialExample::new(
        model,
        x.to_vec(),
        perturbed,
        AttackKind::KernelSub,
        0,
    ))
}

/// `sign` with `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Role;

    fn two_point() -> KnnModel {
        let ds = Dataset::from_rows(
            "t",
            Role::Train,
            2,
            &[vec![0.0, 0.0], vec![2.0, 0.0]],
            vec![0, 1],
        )
        .unwrap();
        KnnModel::fit(&ds, 1).unwrap()
    }

    #[test]
    fn direct_crosses_midplane() {
        let m = two_point();
        let adv = direct_attack(&m, &[0.0, 0.0], 1.1).unwrap();
        assert!((adv.perturbed[0] - 1.1).abs() < 1e-15 && adv.perturbed[1] == 0.0);
        assert!(adv.success);
        let none = direct_attack(&m, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(none.perturbed, vec![0.0, 0.0]);
        assert!(!none.success);
    }

    #[test]
    fn direct_search_finds_midplane() {
        let adv = direct_search_attack(&two_point(), &[0.0, 0.0]).unwrap();
        assert!(adv.success);
        assert!((adv.perturbation_l2 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn direct_needs_opposite_label() {
        let ds =
            Dataset::from_rows("t", Role::Train, 2, &[vec![0.0], vec![1.0]], vec![0, 0]).unwrap();
        let m = KnnModel::fit(&ds, 1).unwrap();
        assert!(matches!(
            direct_attack(&m, &[0.5], 1.0),
            Err(Error::AttackInfeasible(_))
        ));
    }

    #[test]
    fn rba_two_points() {
        let adv = rba_attack(&two_point(), &[0.0, 0.0], 1, false).unwrap();
        assert!((adv.perturbed[0] - (1.0 + 1e-6)).abs() < 1e-9);
        assert!(adv.perturbed[1].abs() < 1e-12);
        assert!(adv.success);
    }

    #[test]
    fn rba_requires_one_nn() {
        let ds = Dataset::from_rows(
            "t",
            Role::Train,
            2,
            &[vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 1, 1],
        )
        .unwrap();
        let m = KnnModel::fit(&ds, 3).unwrap();
        assert!(matches!(
            rba_attack(&m, &[0.0], 1, false),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rba_approx_matches_exact_on_collinear() {
        let ds = Dataset::from_rows(
            "t",
            Role::Train,
            2,
            &[vec![0.0], vec![1.0], vec![3.0]],
            vec![0, 1, 1],
        )
        .unwrap();
        let m = KnnModel::fit(&ds, 1).unwrap();
        let a = rba_attack(&m, &[0.0], 1, false).unwrap();
        let b = rba_attack(&m, &[0.0], 0, true).unwrap();
        assert_eq!(a.perturbed, b.perturbed);
    }

    #[test]
    fn dykstra_corner() {
        // projection of (2, 2) onto {x <= 1, y <= 1} is the corner
        let hs = vec![
            Halfspace {
                normal: vec![1.0, 0.0],
                offset: 1.0,
            },
            Halfspace {
                normal: vec![0.0, 1.0],
                offset: 1.0,
            },
        ];
        let z = dykstra_project(&[2.0, 2.0], &hs, 1e-12, 100).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dykstra_is_not_plain_alternation() {
        // wedge where alternating projections stop short of the true projection
        let hs = vec![
            Halfspace {
                normal: vec![1.0, 1.0],
                offset: 0.0,
            },
            Halfspace {
                normal: vec![-1.0, 1.0],
                offset: 0.0,
            },
        ];
        let z = dykstra_project(&[0.3, 2.0], &hs, 1e-12, 10_000).unwrap();
        assert!(z[0].abs() < 1e-9 && z[1].abs() < 1e-9);
    }

    #[test]
    fn kernel_substitute_single_point_has_no_gradient() {
        let ds = Dataset::from_rows("t", Role::Train, 2, &[vec![0.2, 0.4]], vec![1]).unwrap();
        let m = KnnModel::fit(&ds, 1).unwrap();
        let adv = kernel_substitute_attack(&m, &[1.0, -1.0], 0.3, 0.1, false).unwrap();
        assert_eq!(adv.perturbed, adv.original);
    }

    #[test]
    fn sign_of_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-3.0), -1.0);
    }
}
