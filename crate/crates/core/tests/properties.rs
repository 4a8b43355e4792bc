mod common;

use boundarylab::active::select_random;
use boundarylab::attacks::{scale_perturbation, AdversarialExample, AttackKind};
use boundarylab::classifiers::Classifier;
use boundarylab::data::generate_halfmoon;
use boundarylab::theory::{correctness_on_grid, Grid};
use boundarylab::{
    BoundingBox, Dataset, GroundTruth, HalfmoonTruth, KnnModel, KrrKernel, KrrModel, LinearModel,
    NwKernel, NwModel, Role,
};
use proptest::prelude::*;

fn points(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n)
}

fn labeled(
    n: std::ops::Range<usize>,
    d: usize,
) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    points(n, d).prop_flat_map(|pts| {
        let len = pts.len();
        (Just(pts), prop::collection::vec(0usize..2, len))
    })
}

fn dataset(pts: &[Vec<f64>], labels: Vec<usize>) -> Dataset {
    let d = pts[0].len();
    Dataset::from_rows("p", Role::Train, d, pts, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn halfmoon_shape_and_balance(n in 2usize..400, seed in any::<u64>()) {
        let (ds, _) = generate_halfmoon(n, 0.2, seed).unwrap();
        prop_assert_eq!(ds.len(), n);
        prop_assert_eq!(ds.dim(), 2);
        let counts = ds.class_counts();
        prop_assert_eq!(counts[0], n - n / 2);
        prop_assert_eq!(counts[1], n / 2);
        prop_assert!(ds.features().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn csv_round_trip((pts, labels) in labeled(1..40, 3)) {
        let ds = dataset(&pts, labels);
        let back = Dataset::parse_csv(&ds.to_csv_string(), "p", Role::Train, 2).unwrap();
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.features(), ds.features());
    }

    #[test]
    fn knn_eta_is_a_multiple_of_one_over_k((pts, labels) in labeled(1..60, 2), k in 1usize..8, q in prop::collection::vec(-2.0f64..2.0, 2)) {
        let ds = dataset(&pts, labels);
        let k = k.min(ds.len());
        let m = KnnModel::fit(&ds, k).unwrap();
        let eta = m.predict_eta(&q).unwrap();
        let scaled = eta * k as f64;
        prop_assert!((0.0..=1.0).contains(&eta));
        prop_assert!((scaled - scaled.round()).abs() < 1e-9, "{}", eta);
        prop_assert!((eta - common::brute_knn_eta(&ds, k, &q)).abs() < 1e-12);
    }

    #[test]
    fn knn_is_permutation_invariant((pts, labels) in labeled(2..40, 2), k in 1usize..5, q in prop::collection::vec(-2.0f64..2.0, 2), rot in 0usize..40) {
        let ds = dataset(&pts, labels.clone());
        let k = k.min(ds.len());
        let r = rot % pts.len();
        let mut p2 = pts.clone();
        let mut l2 = labels;
        p2.rotate_left(r);
        l2.rotate_left(r);
        let a = KnnModel::fit(&ds, k).unwrap().predict_eta(&q).unwrap();
        let b = KnnModel::fit(&dataset(&p2, l2), k).unwrap().predict_eta(&q).unwrap();
        // ties may resolve to other points, but only among equal distances
        let distinct = {
            let mut d: Vec<f64> = pts.iter().map(|p| boundarylab::classifiers::distance(p, &q)).collect();
            d.sort_by(f64::total_cmp);
            d.windows(2).all(|w| w[1] > w[0])
        };
        if distinct {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn nw_eta_within_label_range((pts, labels) in labeled(1..60, 2), h in 0.05f64..3.0, q in prop::collection::vec(-2.0f64..2.0, 2)) {
        let ds = dataset(&pts, labels);
        let m = NwModel::fit(&ds, h, NwKernel::Epanechnikov).unwrap();
        let eta = m.predict_eta(&q).unwrap();
        prop_assert!((0.0..=1.0).contains(&eta));
        let (lo, hi) = (ds.labels().iter().min().copied().unwrap(), ds.labels().iter().max().copied().unwrap());
        prop_assert!(eta >= lo as f64 - 1e-12 && eta <= hi as f64 + 1e-12);
    }

    #[test]
    fn krr_dual_residual_is_zero((pts, labels) in labeled(2..30, 2), lambda in 0.01f64..5.0, gamma in 0.1f64..4.0) {
        let ds = dataset(&pts, labels);
        let kernel = KrrKernel::Gaussian { gamma };
        let m = KrrModel::fit(&ds, lambda, kernel).unwrap();
        let a = m.alpha();
        // (G + lambda I) alpha = y
        for i in 0..ds.len() {
            let gi: f64 = (0..ds.len()).map(|j| kernel.eval(ds.row(i), ds.row(j)) * a[j]).sum();
            prop_assert!((gi + lambda * a[i] - ds.label(i) as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn halfmoon_posterior_swaps_with_the_arcs(x in -1.5f64..2.5, y in -1.0f64..1.5) {
        let gt = HalfmoonTruth::new(0.2).unwrap();
        let s = HalfmoonTruth::swap_arcs(&[x, y]);
        prop_assert!((gt.eta(&[x, y]) + gt.eta(&s) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adversarial_bookkeeping(x in prop::collection::vec(-1.0f64..1.0, 3), d in prop::collection::vec(-1.0f64..1.0, 3), scale in 0.0f64..1.5) {
        let m = LinearModel::new(vec![1.0, -0.5, 0.25], 0.1).unwrap();
        let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let adv = AdversarialExample::new(&m, x.clone(), p.clone(), AttackKind::Fgsm, 0);
        prop_assert!(adv.norms_consistent(1e-12));
        prop_assert_eq!(adv.success, m.predict(&x) != m.predict(&p));
        let s = scale_perturbation(&adv, scale, &m).unwrap();
        prop_assert!(s.norms_consistent(1e-12));
        prop_assert!((s.perturbation_l2 - scale * adv.perturbation_l2).abs() < 1e-9);
        prop_assert_eq!(s.success, m.predict(&x) != m.predict(&s.perturbed));
    }

    #[test]
    fn random_selection_nests_and_is_distinct(pool in 0usize..300, a in 0usize..300, b in 0usize..300, seed in any::<u64>()) {
        let (small, large) = (a.min(b).min(pool), a.max(b).min(pool));
        let big = select_random(pool, large, seed).unwrap();
        prop_assert_eq!(&select_random(pool, small, seed).unwrap()[..], &big[..small]);
        let mut sorted = big.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), large);
        prop_assert!(big.iter().all(|&i| i < pool));
        prop_assert!(select_random(pool, pool + 1, seed).is_err());
    }
}

struct Threshold(f64);

impl Classifier for Threshold {
    fn dim(&self) -> usize {
        2
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64]) -> usize {
        usize::from(x[0] + x[1] > self.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn correct_fraction_is_mean_of_flags(t in -1.0f64..2.0, res in 2usize..25) {
        let gt = boundarylab::data::FnGroundTruth::new(BoundingBox::unit(2), |x: &[f64]| x[0]);
        let grid = Grid::new(&gt, res).unwrap();
        let r = correctness_on_grid(&Threshold(t), &grid);
        let hits = r.correct.iter().filter(|&&c| c).count();
        prop_assert_eq!(r.correct_fraction, hits as f64 / r.correct.len() as f64);
        prop_assert!((0.0..=1.0).contains(&r.correct_fraction));
        for i in 0..r.correct.len() {
            prop_assert_eq!(r.correct[i], r.predicted[i] == r.bayes[i]);
        }
    }
}
