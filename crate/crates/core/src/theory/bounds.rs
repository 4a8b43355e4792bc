//! Right-hand sides of the k-NN, Nadaraya-Watson and kernel ridge
//! correctness bounds, and the mass radius `r_p`.

use serde::{Deserialize, Serialize};

use crate::classifiers::squared_distance;
use crate::data::{BoundingBox, GroundTruth};
use crate::error::{check_dim, Error, Result};

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!(
            "mass p must lie in (0, 1], got {p}"
        )));
    }
    Ok(())
}

/// `r_p(x0)` under the empirical law of `samples`: the `ceil(p N)`-th smallest
/// distance from `x0`.
pub fn radius_rp_empirical(samples: &[Vec<f64>], x0: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if samples.is_empty() {
        return Err(Error::invalid("radius needs at least one sample"));
    }
    for s in samples {
        check_dim(x0.len(), s.len())?;
    }
    let mut d2: Vec<f64> = samples.iter().map(|s| squared_distance(s, x0)).collect();
    Ok(kth_distance(&mut d2, p))
}

/// Selects the `ceil(p N)`-th smallest of the squared distances and returns its root.
pub(crate) fn kth_distance(d2: &mut [f64], p: f64) -> f64 {
    let n = d2.len();
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let (_, v, _) = d2.select_nth_unstable_by(rank.min(n) - 1, f64::total_cmp);
    v.sqrt()
}

/// `integral_{u1}^{u2} min(sqrt(r^2 - u^2), a) du` for `a >= 0`, `[u1, u2] ⊆ [-r, r]`.
fn integral_min_chord(a: f64, r: f64, u1: f64, u2: f64) -> f64 {
    let f = |u: f64| {
        let u = u.clamp(-r, r);
        0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
    };
    if u2 <= u1 {
        return 0.0;
    }
    if a >= r {
        return f(u2) - f(u1);
    }
    let q = (r * r - a * a).sqrt();
    let flat_lo = u1.max(-q);
    let flat_hi = u2.min(q);
    let mut total = 0.0;
    if flat_hi > flat_lo {
        total += a * (flat_hi - flat_lo);
    }
    // circular pieces outside [-q, q]
    let left_hi = u2.min(-q);
    if left_hi > u1 {
        total += f(left_hi) - f(u1);
    }
    let right_lo = u1.max(q);
    if u2 > right_lo {
        total += f(u2) - f(right_lo);
    }
    total
}

/// Fraction of the box's volume within distance `r` of `x0` (inside the box).
pub fn ball_mass_uniform_box(support: &BoundingBox, x0: &[f64], r: f64) -> Result<f64> {
    check_dim(support.dim(), x0.len())?;
    if !support.contains(x0) {
        return Err(Error::invalid("centre must lie inside the support"));
    }
    let lo = &support.lower;
    let hi = &support.upper;
    let vol = support.volume();
    Ok(match support.dim() {
        1 => ((x0[0] + r).min(hi[0]) - (x0[0] - r).max(lo[0])).max(0.0) / vol,
        2 => {
            if r == 0.0 {
                return Ok(0.0);
            }
            let u1 = (lo[0] - x0[0]).max(-r);
            let u2 = (hi[0] - x0[0]).min(r);
            let up = hi[1] - x0[1];
            let down = x0[1] - lo[1];
            let area = integral_min_chord(up, r, u1, u2) + integral_min_chord(down, r, u1, u2);
            (area / vol).min(1.0)
        }
        d => {
            return Err(Error::Unsupported(format!(
                "closed-form ball measure is available for d <= 2, got d = {d}"
            )))
        }
    })
}

/// `r_p(x0)` for the uniform law on `support`, by bisection on the closed-form
/// ball measure.
pub fn radius_rp_uniform_box(support: &BoundingBox, x0: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    check_dim(support.dim(), x0.len())?;
    // farthest corner
    let far: f64 = x0
        .iter()
        .zip(support.lower.iter().zip(&support.upper))
        .map(|(x, (l, u))| f64::max(x - l, u - x).powi(2))
        .sum::<f64>()
        .sqrt();
    if p == 1.0 {
        ball_mass_uniform_box(support, x0, far)?;
        return Ok(far);
    }
    let (mut lo, mut hi) = (0.0, far);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ball_mass_uniform_box(support, x0, mid)? >= p {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * far {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm1Params {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub delta: f64,
    /// Hölder exponent of `eta`.
    pub alpha: f64,
    /// Hölder constant of `eta`.
    pub lipschitz: f64,
    /// Constant inside `delta_p`.
    pub c_dp: f64,
}

impl Thm1Params {
    pub fn new(n: usize, k: usize, d: usize, delta: f64) -> Self {
        Self {
            n,
            k,
            d,
            delta,
            alpha: 1.0,
            lipschitz: 1.0,
            c_dp: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1/2), got {}",
                self.delta
            )));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::invalid(format!(
                "need 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if self.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lipschitz >= 0.0 && self.c_dp >= 0.0) {
            return Err(Error::invalid(
                "Lipschitz constant and c_dp must be non-negative",
            ));
        }
        Ok(())
    }

    /// `k/n + delta_p`, the mass whose radius enters the bound.
    pub fn mass(&self) -> Result<f64> {
        let (_, dp) = thm1_constants(self)?;
        Ok(self.k as f64 / self.n as f64 + dp)
    }

    /// `L r^alpha + C0`, the uniform deviation bound at a point with mass radius `r`.
    pub fn deviation_bound(&self, radius: f64) -> Result<f64> {
        let (c0, _) = thm1_constants(self)?;
        Ok(self.lipschitz * radius.powf(self.alpha) + c0)
    }
}

/// `(C0, delta_p)` with
/// `C0 = sqrt((2 ln 2 + ln(n^(d+1) + 1) - ln delta) / (2k))` and
/// `delta_p = c_dp / n (d ln n + ln(1/delta) + sqrt(k (d ln n + ln(1/delta))))`.
pub fn thm1_constants(p: &Thm1Params) -> Result<(f64, f64)> {
    p.validate()?;
    let n = p.n as f64;
    let d = p.d as f64;
    // ln(n^(d+1) + 1) without overflowing n^(d+1)
    let log_pow = (d + 1.0) * n.ln();
    let log_term = log_pow + (-log_pow).exp().ln_1p();
    let c0 = ((2.0 * 2f64.ln() + log_term - p.delta.ln()) / (2.0 * p.k as f64)).sqrt();
    let a = d * n.ln() + (1.0 / p.delta).ln();
    let delta_p = p.c_dp / n * (a + (p.k as f64 * a).sqrt());
    Ok((c0, delta_p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm1Indicator {
    /// Whether `x` lies in the set predicted to be classified correctly.
    pub inside: bool,
    /// False when `k/n + delta_p > 1`, so the radius is undefined.
    pub radius_defined: bool,
    /// `|eta(x) - 1/2| - L r^alpha`, or `-inf` when the radius is undefined.
    pub lhs: f64,
}

/// Membership of `x` in `{ |eta - 1/2| - L r_{k/n + delta_p}(x)^alpha > C0 }`,
/// with the radius taken under the empirical law of `samples`.
pub fn thm1_correct_set_indicator<G: GroundTruth + ?Sized>(
    gt: &G,
    params: &Thm1Params,
    samples: &[Vec<f64>],
    x: &[f64],
) -> Result<Thm1Indicator> {
    check_dim(gt.dim(), x.len())?;
    let (c0, dp) = thm1_constants(params)?;
    let mass = params.k as f64 / params.n as f64 + dp;
    if mass > 1.0 {
        return Ok(Thm1Indicator {
            inside: false,
            radius_defined: false,
            lhs: f64::NEG_INFINITY,
        });
    }
    let r = radius_rp_empirical(samples, x, mass)?;
    let lhs = gt.margin(x) - params.lipschitz * r.powf(params.alpha);
    Ok(Thm1Indicator {
        inside: lhs > c0,
        radius_defined: true,
        lhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Params {
    pub n: usize,
    pub h: f64,
    pub d: usize,
    pub lipschitz: f64,
    pub c: f64,
    /// Defaults to `(ln n)^2`.
    pub t: Option<f64>,
}

impl Thm2Params {
    pub fn new(n: usize, h: f64, d: usize) -> Self {
        Self {
            n,
            h,
            d,
            lipschitz: 1.0,
            c: 1.0,
            t: None,
        }
    }

    pub fn t(&self) -> f64 {
        self.t.unwrap_or_else(|| (self.n as f64).ln().powi(2))
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || self.n == 0 || self.d == 0 {
            return Err(Error::invalid("need h > 0, n >= 1 and d >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm3Params {
    pub base: Thm2Params,
    pub lambda_n: f64,
}

/// `h L + 2 t / (C n h^d mu - t)`; `+inf` when the denominator is not positive.
pub fn thm2_bound(p: &Thm2Params, mu_at_x: f64) -> Result<f64> {
    p.validate()?;
    let t = p.t();
    let denom = p.c * p.n as f64 * p.h.powi(p.d as i32) * mu_at_x - t;
    if !(denom > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(p.h * p.lipschitz + 2.0 * t / denom)
}

/// `2 t / (C n h^d mu - t) + L h + C / (h (C n h^d - t)) sqrt(n / lambda_n)`;
/// `+inf` when either denominator is not positive.
pub fn thm3_bound(p: &Thm3Params, mu_at_x: f64) -> Result<f64> {
    let b = &p.base;
    b.validate()?;
    if !(p.lambda_n > 0.0) {
        return Err(Error::invalid(format!(
            "lambda_n must be positive, got {}",
            p.lambda_n
        )));
    }
    let t = b.t();
    let cnh = b.c * b.n as f64 * b.h.powi(b.d as i32);
    let d1 = cnh * mu_at_x - t;
    let d2 = cnh - t;
    if !(d1 > 0.0 && d2 > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * t / d1 + b.lipschitz * b.h + b.c / (b.h * d2) * (b.n as f64 / p.lambda_n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_interval_radius() {
        let r = radius_rp_uniform_box(&BoundingBox::unit(1), &[0.5], 0.1).unwrap();
        assert!((r - 0.05).abs() < 1e-12);
        let full = radius_rp_uniform_box(&BoundingBox::unit(1), &[0.5], 1.0).unwrap();
        assert_eq!(full, 0.5);
    }

    #[test]
    fn disc_inside_square() {
        let b = BoundingBox::unit(2);
        let m = ball_mass_uniform_box(&b, &[0.5, 0.5], 0.2).unwrap();
        assert!((m - std::f64::consts::PI * 0.04).abs() < 1e-12);
        // quarter disc at a corner
        let q = ball_mass_uniform_box(&b, &[0.0, 0.0], 0.5).unwrap();
        assert!((q - std::f64::consts::PI * 0.25 / 4.0).abs() < 1e-12);
        assert!((ball_mass_uniform_box(&b, &[0.3, 0.6], 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_radius_rank() {
        let s: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64]).collect();
        assert_eq!(radius_rp_empirical(&s, &[0.0], 0.3).unwrap(), 3.0);
        assert_eq!(radius_rp_empirical(&s, &[0.0], 1.0).unwrap(), 10.0);
        assert!(radius_rp_empirical(&s, &[0.0], 1.5).is_err());
        assert!(radius_rp_empirical(&s, &[0.0], 0.0).is_err());
    }

    #[test]
    fn c0_monotone() {
        let base = Thm1Params::new(1000, 50, 2, 0.05);
        let (c0, _) = thm1_constants(&base).unwrap();
        let more_k = thm1_constants(&Thm1Params {
            k: 100,
            ..base.clone()
        })
        .unwrap()
        .0;
        let small_delta = thm1_constants(&Thm1Params {
            delta: 0.01,
            ..base.clone()
        })
        .unwrap()
        .0;
        assert!(more_k < c0 && small_delta > c0);
    }

    #[test]
    fn vacuous_bounds_are_infinite() {
        let p = Thm2Params::new(100, 0.01, 2);
        assert_eq!(thm2_bound(&p, 1.0).unwrap(), f64::INFINITY);
        let q = Thm3Params {
            base: p,
            lambda_n: 10.0,
        };
        assert_eq!(thm3_bound(&q, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn thm2_decreases_in_mu() {
        let p = Thm2Params::new(10_000, 0.1, 2);
        assert!(thm2_bound(&p, 2.0).unwrap() < thm2_bound(&p, 1.0).unwrap());
    }
}
