mod common;

use std::f64::consts::PI;

use boundarylab::classifiers::Classifier;
use boundarylab::data::{generate_halfmoon, sample_beta_concentrated, FnGroundTruth};
use boundarylab::neural::{mlp_input_gradient, mlp_train, DifferentiableModel};
use boundarylab::stats::{ks_p_value, ks_statistic_uniform};
use boundarylab::{
    BetaSamplerConfig, BoundingBox, Dataset, GroundTruth, HalfmoonTruth, KnnModel, KrrKernel,
    KrrModel, MlpModel, NwKernel, NwModel, Role, TrainConfig,
};
use common::*;
use rand::Rng;

#[test]
fn halfmoon_posterior_matches_monte_carlo() {
    let sigma: f64 = 0.2;
    let truth = HalfmoonTruth::new(sigma).unwrap();
    let x = [0.0, 1.0];
    let mut r = rng(11);
    let mut p = [0.0f64; 2];
    for _ in 0..1_000_000 {
        let t = r.random_range(0.0..PI);
        let arcs = [[t.cos(), t.sin()], [1.0 - t.cos(), 0.5 - t.sin()]];
        for c in 0..2 {
            let d2 = (x[0] - arcs[c][0]).powi(2) + (x[1] - arcs[c][1]).powi(2);
            p[c] += (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    let mc = p[1] / (p[0] + p[1]);
    assert!(
        (truth.eta(&x) - mc).abs() < 0.005,
        "eta {} vs monte carlo {mc}",
        truth.eta(&x)
    );
}

#[test]
fn halfmoon_table_size_is_balanced() {
    let (ds, _) = generate_halfmoon(1800, 0.2, 1).unwrap();
    assert_eq!(ds.class_counts(), vec![900, 900]);
}

#[test]
fn uniform_sampler_passes_ks() {
    let truth = HalfmoonTruth::new(0.2).unwrap();
    let pts = sample_beta_concentrated(&truth, &BetaSamplerConfig::new(0.0, 5), 2000).unwrap();
    let b = truth.support();
    for axis in 0..2 {
        let v: Vec<f64> = pts.iter().map(|p| p[axis]).collect();
        let d = ks_statistic_uniform(&v, b.lower[axis], b.upper[axis]);
        assert!(ks_p_value(d, v.len()) > 0.01, "axis {axis}: D = {d}");
    }
}

#[test]
fn beta_concentrates_near_boundary() {
    let truth = HalfmoonTruth::new(0.2).unwrap();
    let near = |beta: f64| {
        let pts = sample_beta_concentrated(&truth, &BetaSamplerConfig::new(beta, 3), 2000).unwrap();
        pts.iter()
            .filter(|p| (truth.eta(p) - 0.5).abs() < 0.1)
            .count()
    };
    assert!(near(2.0) > near(0.0));
}

#[test]
fn sampler_histogram_follows_density() {
    let eps = 0.05;
    let beta = 1.0;
    let gt = FnGroundTruth::new(BoundingBox::unit(1), |x: &[f64]| x[0]);
    let cfg = BetaSamplerConfig {
        beta,
        density_floor: eps,
        seed: 2,
        ..Default::default()
    };
    let n = 100_000;
    let pts = sample_beta_concentrated(&gt, &cfg, n).unwrap();
    let density = |x: f64| ((x - 0.5).abs().max(eps)).powf(-beta);
    // expected decile masses by fine quadrature
    let steps = 10_000;
    let mut mass = [0.0; 10];
    for i in 0..steps {
        let x = (i as f64 + 0.5) / steps as f64;
        mass[(x * 10.0) as usize] += density(x);
    }
    let total: f64 = mass.iter().sum();
    let mut counts = [0usize; 10];
    for p in &pts {
        counts[((p[0] * 10.0) as usize).min(9)] += 1;
    }
    for b in 0..10 {
        let expected = mass[b] / total;
        let observed = counts[b] as f64 / n as f64;
        assert!(
            (observed / expected - 1.0).abs() < 0.05,
            "bin {b}: {observed} vs {expected}"
        );
    }
}

#[test]
fn knn_matches_full_scan_on_halfmoon() {
    let (train, _) = generate_halfmoon(100, 0.2, 7).unwrap();
    let model = KnnModel::fit(&train, 5).unwrap();
    let queries = generate_halfmoon(200, 0.3, 8).unwrap().0;
    for q in queries.rows() {
        assert_eq!(model.predict_eta(q).unwrap(), brute_knn_eta(&train, 5, q));
    }
}

#[test]
fn knn_matches_full_scan_on_random_points() {
    let train = random_dataset(3, 200, 3);
    let model = KnnModel::fit(&train, 7).unwrap();
    let mut r = rng(4);
    for q in random_points(&mut r, 50, 3) {
        let eta = brute_knn_eta(&train, 7, &q);
        assert_eq!(model.predict_eta(&q).unwrap(), eta);
        assert_eq!(model.predict(&q), usize::from(eta > 0.5));
    }
}

#[test]
fn knn_perfect_on_own_training_points() {
    let (train, _) = generate_halfmoon(300, 0.2, 2).unwrap();
    let model = KnnModel::fit(&train, 1).unwrap();
    assert!(train
        .rows()
        .zip(train.labels())
        .all(|(x, &y)| model.predict(x) == y));
}

#[test]
fn boxcar_nw_is_radius_average() {
    let train = random_dataset(5, 150, 2);
    let h = 0.12;
    let model = NwModel::fit(&train, h, NwKernel::Boxcar).unwrap();
    let mut r = rng(6);
    for q in random_points(&mut r, 100, 2) {
        let got = model.predict_eta(&q).unwrap();
        assert!((got - radius_average(&train, h, &q)).abs() < 1e-12);
    }
}

#[test]
fn krr_matches_dense_solve() {
    let train = random_dataset(9, 50, 2);
    let lambda = 0.1;
    let kernel = KrrKernel::Gaussian { gamma: 2.0 };
    let model = KrrModel::fit(&train, lambda, kernel).unwrap();
    let n = train.len();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    kernel.eval(train.row(i), train.row(j)) + if i == j { lambda } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = train.labels().iter().map(|&v| v as f64).collect();
    let alpha = dense_solve(a, y);
    let mut r = rng(10);
    for q in random_points(&mut r, 50, 2) {
        let oracle: f64 = train
            .rows()
            .zip(&alpha)
            .map(|(row, a)| a * kernel.eval(&q, row))
            .sum();
        assert!((model.predict_eta(&q).unwrap() - oracle).abs() < 1e-8);
    }
}

#[test]
fn krr_dual_solution_is_stationary() {
    let train = random_dataset(12, 40, 2);
    let model = KrrModel::fit(&train, 0.1, KrrKernel::Gaussian { gamma: 1.0 }).unwrap();
    let base = model.objective(model.alpha());
    let mut r = rng(13);
    for _ in 0..20 {
        let v: Vec<f64> = (0..train.len()).map(|_| r.random::<f64>() - 0.5).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let moved: Vec<f64> = model
            .alpha()
            .iter()
            .zip(&v)
            .map(|(a, b)| a + 1e-3 * b / norm)
            .collect();
        assert!(base <= model.objective(&moved) + 1e-12);
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Forward pass recomputed from the raw layer parameters.
fn reference_probabilities(model: &MlpModel, x: &[f64]) -> Vec<f64> {
    let layers = model.layers();
    let mut a = x.to_vec();
    for (li, layer) in layers.iter().enumerate() {
        let z: Vec<f64> = (0..layer.bias.len())
            .map(|o| {
                layer.bias[o]
                    + (0..a.len())
                        .map(|i| layer.weights[o * a.len() + i] * a[i])
                        .sum::<f64>()
            })
            .collect();
        a = if li + 1 == layers.len() {
            z
        } else {
            z.into_iter().map(sigmoid).collect()
        };
    }
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[test]
fn mlp_probabilities_match_reference() {
    let mut r = rng(14);
    for seed in 0..10 {
        let model = MlpModel::glorot(&[5, 8, 6, 3], seed).unwrap();
        let x: Vec<f64> = (0..5).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let p = model.probabilities(&x);
        for (a, b) in p.iter().zip(reference_probabilities(&model, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut r = rng(15);
    for (d, c) in [(2, 2), (8, 2), (2, 10), (8, 10)] {
        for case in 0..20 {
            let model = MlpModel::glorot(&[d, 16, c], case).unwrap();
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
            let y = case as usize % c;
            let g = mlp_input_gradient(&model, &x, y).unwrap();
            let fd = finite_difference(|p| model.loss(p, y), &x, 1e-5);
            assert!(
                max_relative_error(&g, &fd) <= 1e-4,
                "shape ({d},{c}) case {case}"
            );
        }
    }
}

#[test]
fn mlp_separates_blobs() {
    let mut r = rng(16);
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let c = i % 2;
        let center = if c == 0 { 0.25 } else { 0.75 };
        pts.push(vec![
            center + 0.1 * (r.random::<f64>() - 0.5),
            center + 0.1 * (r.random::<f64>() - 0.5),
        ]);
        labels.push(c);
    }
    let train = Dataset::from_rows("blobs", Role::Train, 2, &pts, labels).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let (model, losses) = mlp_train(&train, &cfg).unwrap();
    assert!(losses.iter().all(|l| l.is_finite()));
    let hits = train
        .rows()
        .zip(train.labels())
        .filter(|(x, &y)| model.predict(x) == y)
        .count();
    assert!(hits as f64 / 200.0 >= 0.99);
    // identical seed, identical parameters
    assert_eq!(mlp_train(&train, &cfg).unwrap().0, model);
}

#[test]
fn mlp_on_mnist_1v7() {
    let (train, test) = mnist_1v7();
    let (model, _) = mlp_train(&train, &TrainConfig::default()).unwrap();
    let hits = test
        .rows()
        .zip(test.labels())
        .filter(|(x, &y)| model.predict(x) == y)
        .count();
    assert!(
        hits as f64 / test.len() as f64 >= 0.95,
        "accuracy {}",
        hits as f64 / test.len() as f64
    );
}

#[test]
fn estimators_improve_with_sample_size() {
    let truth = HalfmoonTruth::new(0.2).unwrap();
    let test = generate_halfmoon(2000, 0.2, 500).unwrap().0;
    let error = |m: &dyn Classifier| {
        test.rows()
            .zip(test.labels())
            .filter(|(x, &y)| m.predict(x) != y)
            .count() as f64
            / test.len() as f64
    };
    let mut means = Vec::new();
    for n in [100, 400, 1600] {
        let mut sums = [0.0; 2];
        for seed in 0..10 {
            let train = boundarylab::data::sample_labeled(
                &truth,
                &BetaSamplerConfig::new(0.0, seed),
                n,
                "u",
            )
            .unwrap();
            sums[0] += error(&KnnModel::fit(&train, 5).unwrap()) / 10.0;
            sums[1] += error(&NwModel::fit(&train, 0.3, NwKernel::Triangular).unwrap()) / 10.0;
        }
        means.push(sums);
    }
    for e in 0..2 {
        assert!(
            means[1][e] <= means[0][e] && means[2][e] <= means[1][e],
            "estimator {e}: {means:?}"
        );
    }
}
