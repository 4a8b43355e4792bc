//! Kernel ridge regression in dual form.
//!
//! Minimizing `sum (y_i - f(x_i))^2 + lambda ||f||_H^2` over the RKHS gives
//! `f = sum alpha_i K(., x_i)` with `(G + lambda I) alpha = y`. The system is
//! solved by a Cholesky factorization followed by one step of iterative
//! refinement.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifiers::{squared_distance, Classifier};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KrrKernel {
    Linear,
    /// `exp(-gamma |x - z|^2)`
    Gaussian {
        gamma: f64,
    },
}

impl KrrKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KrrKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KrrKernel::Gaussian { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }

    /// Gaussian kernel with `gamma = 1 / (2 * median pairwise squared distance)`.
    pub fn gaussian_median_heuristic(data: &Dataset) -> Result<Self> {
        let n = data.len();
        let mut d2 = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                d2.push(squared_distance(data.row(i), data.row(j)));
            }
        }
        if d2.is_empty() {
            return Err(Error::invalid("median heuristic needs at least two points"));
        }
        let mid = d2.len() / 2;
        let (_, median, _) = d2.select_nth_unstable_by(mid, f64::total_cmp);
        if !(*median > 0.0) {
            return Err(Error::Numeric("median pairwise distance is zero".into()));
        }
        Ok(KrrKernel::Gaussian {
            gamma: 1.0 / (2.0 * *median),
        })
    }
}

impl fmt::Display for KrrKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KrrKernel::Linear => f.write_str("linear"),
            KrrKernel::Gaussian { gamma } => write!(f, "gaussian({gamma})"),
        }
    }
}

/// Relative residual `||(G + lambda I) alpha - y|| / ||y||` accepted after solving.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    lambda: f64,
    kernel: KrrKernel,
    alpha: Vec<f64>,
    train: Dataset,
}

impl KrrModel {
    pub fn fit(train: &Dataset, lambda: f64, kernel: KrrKernel) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if train.num_classes() != 2 {
            return Err(Error::Unsupported(
                "kernel ridge classifier is binary only".into(),
            ));
        }
        if train.is_empty() {
            return Err(Error::invalid("cannot fit on an empty training set"));
        }
        let n = train.len();
        let mut system = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.eval(train.row(i), train.row(j));
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("kernel value K({i}, {j}) is {v}")));
                }
                system[i * n + j] = v;
                system[j * n + i] = v;
            }
            system[i * n + i] += lambda;
        }
        let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
        let factor = cholesky(&system, n)?;
        let mut alpha = cholesky_solve(&factor, n, &y);
        // one refinement step against the unfactored system
        let r = residual(&system, n, &alpha, &y);
        let correction = cholesky_solve(&factor, n, &r);
        for (a, c) in alpha.iter_mut().zip(&correction) {
            *a += c;
        }
        let res = norm(&residual(&system, n, &alpha, &y));
        let y_norm = norm(&y);
        if res > RESIDUAL_TOLERANCE * y_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::IllConditioned(format!(
                "relative residual {:.3e} after refinement",
                res / y_norm
            )));
        }
        Ok(Self {
            lambda,
            kernel,
            alpha,
            train: train.clone(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> KrrKernel {
        self.kernel
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn predict_eta(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.train.dim(), x.len())?;
        Ok(self.eta(x))
    }

    fn eta(&self, x: &[f64]) -> f64 {
        self.train
            .rows()
            .zip(&self.alpha)
            .map(|(row, a)| a * self.kernel.eval(x, row))
            .sum()
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        Ok(usize::from(self.predict_eta(x)? > 0.5))
    }

    /// Value of `sum (y_i - f(x_i))^2 + lambda ||f||_H^2` for dual coefficients
    /// `alpha`, using `||f||_H^2 = alpha^T G alpha`.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let fitted: Vec<f64> = self
            .train
            .rows()
            .map(|xi| {
                self.train
                    .rows()
                    .zip(alpha)
                    .map(|(xj, a)| self.kernel.eval(xi, xj) * a)
                    .sum()
            })
            .collect();
        let loss: f64 = fitted
            .iter()
            .zip(self.train.labels())
            .map(|(f, &y)| (y as f64 - f).powi(2))
            .sum();
        let norm_sq: f64 = alpha.iter().zip(&fitted).map(|(a, f)| a * f).sum();
        loss + self.lambda * norm_sq
    }
}

impl Classifier for KrrModel {
    fn dim(&self) -> usize {
        self.train.dim()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.eta(x) > 0.5)
    }

    fn score(&self, x: &[f64]) -> Option<f64> {
        Some(self.eta(x))
    }
}

/// Lower-triangular `L` with `A = L L^T`, row-major.
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::IllConditioned(format!(
                        "matrix not positive definite at pivot {i} ({s:.3e})"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

fn residual(a: &[f64], n: usize, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| {
            b[i] - a[i * n..(i + 1) * n]
                .iter()
                .zip(x)
                .map(|(p, q)| p * q)
                .sum::<f64>()
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
