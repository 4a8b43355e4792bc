//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::path::PathBuf;

use boundarylab::data::load_mnist_idx;
use boundarylab::{Dataset, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect()
}

pub fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut r = rng(seed);
    let pts = random_points(&mut r, n, d);
    let labels = (0..n).map(|_| r.random_range(0..2)).collect();
    Dataset::from_rows("random", Role::Train, 2, &pts, labels).unwrap()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Full scan: the `k` smallest distances with ties to the lower index.
pub fn brute_knn_eta(train: &Dataset, k: usize, x: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> = train
        .rows()
        .enumerate()
        .map(|(i, r)| (sq(r, x), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d[..k]
        .iter()
        .map(|&(_, i)| train.label(i) as f64)
        .sum::<f64>()
        / k as f64
}

/// Plain average of labels strictly inside radius `h`, nearest label otherwise.
pub fn radius_average(train: &Dataset, h: f64, x: &[f64]) -> f64 {
    let inside: Vec<f64> = train
        .rows()
        .zip(train.labels())
        .filter(|(r, _)| sq(r, x).sqrt() < h)
        .map(|(_, &y)| y as f64)
        .collect();
    if inside.is_empty() {
        return brute_knn_eta(train, 1, x);
    }
    inside.iter().sum::<f64>() / inside.len() as f64
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest entrywise error relative to the gradient's scale.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric
        .iter()
        .chain(analytic)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// MNIST digits 1 and 7 from the bundled subset, split 1000 train / 500 test.
pub fn mnist_1v7() -> (Dataset, Dataset) {
    let dir = data_dir().join("mnist");
    let all = load_mnist_idx(
        dir.join("mnist10k-images-idx3-ubyte.gz"),
        dir.join("mnist10k-labels-idx1-ubyte.gz"),
        Some(&[1, 7]),
    )
    .expect("bundled MNIST subset");
    let mut parts = all.stratified_split(&[1000, 500], 0).unwrap().into_iter();
    (
        parts.next().unwrap(),
        parts.next().unwrap().with_role(Role::Test),
    )
}
