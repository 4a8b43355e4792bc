//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails at the end if any criterion did not hold.
//!
//! Run with `cargo test -p boundarylab-cli --test acceptance -- --nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use boundarylab::active::PipelineReport;
use boundarylab::attacks::{
    bbox_opt_attack, cw_l2, deepfool, direct_attack, pgd, rba_attack, BboxConfig, CwConfig,
    KernelSubstitute,
};
use boundarylab::classifiers::Classifier;
use boundarylab::neural::{mlp_input_gradient, mlp_train, DifferentiableModel};
use boundarylab::theory::{
    beta_monotonicity_experiment, verify_knn_bound, BetaSweepConfig, VerifyConfig,
};
use boundarylab::{
    Dataset, HalfmoonTruth, KnnModel, KrrKernel, KrrModel, LinearModel, MlpModel, ModelSpec,
    NwKernel, NwModel, Role, TrainConfig,
};
use boundarylab_cli::{main_with_args, parse_report_csv};
use common::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli(args: &[&str]) -> String {
    let mut out = Vec::new();
    let argv = std::iter::once("boundarylab").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{args:?}\n{text}");
    text
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Seed means keyed by strategy label (the attack name for adversarial runs).
fn seed_means(reports: &[PipelineReport], budget: usize) -> BTreeMap<String, (f64, Option<f64>)> {
    let mut groups: BTreeMap<String, Vec<&PipelineReport>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.budget == budget) {
        let key = if r.attack == "none" {
            r.strategy.clone()
        } else {
            r.attack.clone()
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let n = rs.len() as f64;
            let acc = rs.iter().map(|r| r.shadow_acc).sum::<f64>() / n;
            let l2 = rs
                .iter()
                .map(|r| r.mean_l2)
                .sum::<Option<f64>>()
                .map(|s| s / n);
            (k, (acc, l2))
        })
        .collect()
}

fn halfmoon_al(out_dir: &Path) -> String {
    cli(&["al", "--dataset", "halfmoon", "--out-dir", p(out_dir)]);
    std::fs::read_to_string(out_dir.join("al.csv")).unwrap()
}

fn beta_monotonicity() -> Outcome {
    let start = Instant::now();
    let gt = HalfmoonTruth::new(0.2).unwrap();
    let specs = [
        ModelSpec::Knn { k: 1 },
        ModelSpec::Nw {
            bandwidth: 0.15,
            kernel: NwKernel::Triangular,
        },
    ];
    let reports = beta_monotonicity_experiment(&gt, &specs, &BetaSweepConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let pass = reports
        .iter()
        .all(|r| r.non_decreasing() && r.spearman > 0.0)
        && elapsed <= Duration::from_secs(120);
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "{} means {:.4?} spearman {:.2}",
                r.estimator, r.means, r.spearman
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    check(pass, format!("{detail}; {:.0}s", elapsed.as_secs_f64()))
}

fn halfmoon_ordering(csv: &str) -> Outcome {
    let means = seed_means(&parse_report_csv(csv).unwrap(), 2000);
    let random = means["random"].0;
    let attacks = ["direct", "rba", "kernel_sub", "bbox"];
    let acc_ok = attacks.iter().all(|a| means[*a].0 >= random);
    let rba_l2 = means["rba"].1.unwrap();
    let l2_ok = attacks.iter().all(|a| rba_l2 <= means[*a].1.unwrap());
    let detail = std::iter::once(format!("random {:.4}", random))
        .chain(
            attacks
                .iter()
                .map(|a| format!("{a} {:.4} (L2 {:.4})", means[*a].0, means[*a].1.unwrap())),
        )
        .collect::<Vec<_>>()
        .join(", ");
    check(acc_ok && l2_ok, detail)
}

fn mnist_budget_trend() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mnist = data_dir().join("mnist");
    cli(&[
        "al",
        "--dataset",
        "mnist1v7",
        "--strategy",
        "adversarial",
        "--attacks",
        "bbox",
        "--budgets",
        "400,600,1000",
        "--seeds",
        "5",
        "--images",
        p(&mnist.join("mnist10k-images-idx3-ubyte.gz")),
        "--labels",
        p(&mnist.join("mnist10k-labels-idx1-ubyte.gz")),
        "--out-dir",
        p(dir.path()),
    ]);
    let elapsed = start.elapsed();
    let reports =
        parse_report_csv(&std::fs::read_to_string(dir.path().join("al.csv")).unwrap()).unwrap();
    let gap = |b| {
        let m = seed_means(&reports, b);
        (m["bbox"].0, m["random"].0)
    };
    let [g400, g600, g1000] = [400, 600, 1000].map(gap);
    let d = |g: (f64, f64)| g.0 - g.1;
    let pass =
        d(g400) > 0.0 && d(g600) > 0.0 && d(g1000) < d(g600) && elapsed <= Duration::from_secs(600);
    check(
        pass,
        format!(
            "bbox/random 400: {:.4}/{:.4}, 600: {:.4}/{:.4}, 1000: {:.4}/{:.4}; {:.0}s",
            g400.0,
            g400.1,
            g600.0,
            g600.1,
            g1000.0,
            g1000.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn knn_bound() -> Outcome {
    let gt = HalfmoonTruth::new(0.2).unwrap();
    let cfg = VerifyConfig {
        n: 500,
        k: 25,
        delta: 0.05,
        trials: 200,
        ..VerifyConfig::default()
    };
    let r = verify_knn_bound(&gt, &cfg).unwrap();
    check(
        r.violation_fraction <= 0.10,
        format!(
            "violation fraction {:.3} over {} trials",
            r.violation_fraction, cfg.trials
        ),
    )
}

fn gradient_fidelity() -> Outcome {
    let mut r = rng(501);
    let (mnist_train, _) = mnist_1v7();
    let mut worst: f64 = 0.0;
    for d in [2, 8, 784] {
        for case in 0..20u64 {
            let model = MlpModel::glorot(&[d, 16, 2], case).unwrap();
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
            let y = case as usize % 2;
            let g = mlp_input_gradient(&model, &x, y).unwrap();
            worst = worst.max(max_relative_error(
                &g,
                &finite_difference(|q| model.loss(q, y), &x, 1e-5),
            ));
        }
        let train = if d == 784 {
            let rows: Vec<Vec<f64>> = mnist_train.rows().take(30).map(<[f64]>::to_vec).collect();
            Dataset::from_rows(
                "mnist",
                Role::Train,
                2,
                &rows,
                mnist_train.labels()[..30].to_vec(),
            )
            .unwrap()
        } else {
            random_dataset(d as u64, 30, d)
        };
        // wide enough that several neighbours share the softmax weight
        let c = if d == 784 { 50.0 } else { 0.5 };
        let sub = KernelSubstitute::new(&train, c).unwrap();
        for case in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
            let y = case % 2;
            let fd = finite_difference(|q| sub.loss(q, y), &x, 1e-5);
            worst = worst.max(max_relative_error(&sub.loss_gradient(&x, y), &fd));
        }
    }
    check(worst <= 1e-4, format!("max relative error {worst:.2e}"))
}

#[derive(serde::Deserialize)]
struct TwoPoint {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
}

fn attack_geometry() -> Outcome {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/tests/data/two_point_1nn.json"
    );
    let corpus: Vec<TwoPoint> =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for (i, case) in corpus.iter().enumerate() {
        let ds = Dataset::from_rows(
            "pair",
            Role::Train,
            2,
            &[case.a.clone(), case.b.clone()],
            vec![0, 1],
        )
        .unwrap();
        let model = KnnModel::fit(&ds, 1).unwrap();
        let x: Vec<f64> = case
            .a
            .iter()
            .zip(&case.b)
            .map(|(a, b)| a + case.t * (b - a))
            .collect();
        let gap = case
            .a
            .iter()
            .zip(&case.b)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let truth = (0.5 - case.t) * gap;
        let found = [
            rba_attack(&model, &x, 1, true).unwrap(),
            direct_attack(&model, &x, truth * (1.0 + 1e-9)).unwrap(),
            bbox_opt_attack(&model, &x, 0, &BboxConfig::default(), i as u64).unwrap(),
        ];
        for e in &found {
            worst = worst.max(if e.success {
                (e.perturbation_l2 - truth).abs()
            } else {
                f64::INFINITY
            });
        }
    }
    let mut r = rng(601);
    let mut worst_df: f64 = 0.0;
    for _ in 0..100 {
        let d = r.random_range(1..10);
        let w: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let model = LinearModel::new(w.clone(), r.random::<f64>() - 0.5).unwrap();
        let x: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let expected = model.decision(&x).abs() / w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = deepfool(&model, &x, 0.0, 50, false)
            .unwrap()
            .perturbation_l2;
        worst_df = worst_df.max((got - expected).abs());
    }
    check(
        worst < 1e-3 && worst_df < 1e-6,
        format!(
            "{} two-point cases, worst gap {worst:.2e}; DeepFool linear worst {worst_df:.2e}",
            corpus.len()
        ),
    )
}

fn cw_quality() -> Outcome {
    let (train, test) = mnist_1v7();
    let model = mlp_train(&train, &TrainConfig::default()).unwrap().0;
    let (mut cw_sum, mut pgd_sum, mut inside) = (0.0, 0.0, true);
    for x in test.rows().take(50) {
        let y = model.predict(x);
        let cw = cw_l2(&model, x, y, None, &CwConfig::default()).unwrap();
        inside &= cw.perturbed.iter().all(|v| (0.0..=1.0).contains(v));
        cw_sum += cw.perturbation_l2;
        pgd_sum += pgd(&model, x, y, 0.3, 0.01, 40, true)
            .unwrap()
            .perturbation_l2;
    }
    check(
        inside && cw_sum <= pgd_sum,
        format!(
            "in box: {inside}; mean L2 C&W {:.4} vs PGD {:.4}",
            cw_sum / 50.0,
            pgd_sum / 50.0
        ),
    )
}

fn determinism(first: &str, second: &str) -> Outcome {
    check(
        first == second,
        format!("{} bytes, identical: {}", first.len(), first == second),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut knn_ok = true;
    let (mut nw_err, mut krr_err): (f64, f64) = (0.0, 0.0);
    for seed in 0..5u64 {
        let train = random_dataset(700 + seed, 50, 2);
        let queries = random_points(&mut rng(800 + seed), 50, 2);
        for k in [1, 3, 7] {
            let m = KnnModel::fit(&train, k).unwrap();
            knn_ok &= queries
                .iter()
                .all(|q| m.predict_eta(q).unwrap() == brute_knn_eta(&train, k, q));
        }
        let nw = NwModel::fit(&train, 0.2, NwKernel::Boxcar).unwrap();
        for q in &queries {
            nw_err =
                nw_err.max((nw.predict_eta(q).unwrap() - radius_average(&train, 0.2, q)).abs());
        }
        let lambda = 0.1;
        let kernel = KrrKernel::Gaussian { gamma: 2.0 };
        let krr = KrrModel::fit(&train, lambda, kernel).unwrap();
        let n = train.len();
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        kernel.eval(train.row(i), train.row(j)) + if i == j { lambda } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let alpha = dense_solve(gram, train.labels().iter().map(|&y| y as f64).collect());
        for q in &queries {
            let oracle: f64 = train
                .rows()
                .zip(&alpha)
                .map(|(row, a)| a * kernel.eval(q, row))
                .sum();
            krr_err = krr_err.max((krr.predict_eta(q).unwrap() - oracle).abs());
        }
    }
    check(
        knn_ok && nw_err <= 1e-8 && krr_err <= 1e-8,
        format!("kNN exact: {knn_ok}; NW max error {nw_err:.1e}; KRR max error {krr_err:.1e}"),
    )
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut report = |id: usize, name: &str, o: Outcome| {
        println!(
            "{} {id} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    };
    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    report(1, "beta monotonicity", beta_monotonicity());
    let first = halfmoon_al(runs[0].path());
    report(2, "halfmoon strategy ordering", halfmoon_ordering(&first));
    report(3, "mnist budget trend", mnist_budget_trend());
    report(4, "knn bound", knn_bound());
    report(5, "gradient fidelity", gradient_fidelity());
    report(6, "attack geometry", attack_geometry());
    report(7, "cw feasibility and quality", cw_quality());
    let second = halfmoon_al(runs[1].path());
    report(8, "determinism", determinism(&first, &second));
    report(9, "oracle equivalence", oracle_equivalence());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
