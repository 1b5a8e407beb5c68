use metamodel_core::rng::{derive_seed, rng};
use metamodel_core::significance::bootstrap_compare;
use metamodel_core::{Error, MetricKind};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Truth plus two independent predictors with the same noise level.
fn equal_quality(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let truth: Vec<f64> = (0..n).map(|_| gauss(&mut r)).collect();
    let a = truth.iter().map(|t| t + 0.5 * gauss(&mut r)).collect();
    let b = truth.iter().map(|t| t + 0.5 * gauss(&mut r)).collect();
    (a, b, truth)
}

#[test]
fn identical_predictions_give_exactly_one_half() {
    let (a, _, truth) = equal_quality(50, 1);
    for metric in [MetricKind::Rmse, MetricKind::Mae, MetricKind::Mse] {
        assert_eq!(bootstrap_compare(&a, &a, &truth, metric, 1000, 4).unwrap().p_value, 0.5);
    }
    let labels: Vec<f64> = truth.iter().map(|t| (*t > 0.0) as u8 as f64).collect();
    for metric in [MetricKind::RocAuc, MetricKind::PrcAuc] {
        assert_eq!(bootstrap_compare(&a, &a, &labels, metric, 1000, 4).unwrap().p_value, 0.5);
    }
}

#[test]
fn equal_quality_predictors_average_one_half() {
    let ps: Vec<f64> = (0..20)
        .map(|s| {
            let (a, b, truth) = equal_quality(200, derive_seed(99, s));
            bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 2000, s).unwrap().p_value
        })
        .collect();
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    assert!((0.4..=0.6).contains(&mean), "mean p {mean} from {ps:?}");
}

#[test]
fn dominant_predictor_gives_small_p() {
    let truth: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let reversed: Vec<f64> = truth.iter().rev().copied().collect();
    let r = bootstrap_compare(&truth, &reversed, &truth, MetricKind::Rmse, 2000, 5).unwrap();
    assert!(r.p_value < 0.01);
    assert_eq!(r.metric_a, 0.0);
    let back = bootstrap_compare(&reversed, &truth, &truth, MetricKind::Rmse, 2000, 5).unwrap();
    assert!(back.p_value > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn swapping_predictors_complements_p(seed in any::<u64>(), n in 10usize..80) {
        let (a, b, truth) = equal_quality(n, seed);
        let n_boot = 300;
        let ab = bootstrap_compare(&a, &b, &truth, MetricKind::Mae, n_boot, seed).unwrap().p_value;
        let ba = bootstrap_compare(&b, &a, &truth, MetricKind::Mae, n_boot, seed).unwrap().p_value;
        prop_assert!((ab + ba - 1.0).abs() <= 1.0 / n_boot as f64);
    }

    #[test]
    fn auc_p_ignores_monotone_transforms(seed in any::<u64>()) {
        let (a, b, truth) = equal_quality(60, seed);
        let labels: Vec<f64> = truth.iter().map(|t| (*t > 0.2) as u8 as f64).collect();
        prop_assume!(labels.iter().any(|l| *l == 1.0) && labels.iter().any(|l| *l == 0.0));
        let warp = |v: &[f64]| v.iter().map(|x| x.exp() * 3.0 - 1.0).collect::<Vec<f64>>();
        let p = bootstrap_compare(&a, &b, &labels, MetricKind::RocAuc, 200, seed).unwrap().p_value;
        let q = bootstrap_compare(&warp(&a), &warp(&b), &labels, MetricKind::RocAuc, 200, seed).unwrap().p_value;
        prop_assert_eq!(p, q);
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let (a, b, truth) = equal_quality(80, 8);
    let x = bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 500, 21).unwrap();
    let y = bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 500, 21).unwrap();
    assert_eq!(x, y);
    assert_eq!(x.p_value.to_bits(), y.p_value.to_bits());
}

#[test]
fn rare_class_resamples_are_redrawn() {
    let mut labels = vec![0.0; 12];
    labels[5] = 1.0;
    let a: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
    let b: Vec<f64> = a.iter().rev().copied().collect();
    let r = bootstrap_compare(&a, &b, &labels, MetricKind::RocAuc, 500, 2).unwrap();
    assert!((0.0..=1.0).contains(&r.p_value));
    assert_eq!(r.n_boot, 500);
}

#[test]
fn precondition_errors() {
    let (a, b, truth) = equal_quality(9, 1);
    assert!(matches!(
        bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 100, 0),
        Err(Error::TooFewRows { .. })
    ));
    let (a, b, truth) = equal_quality(20, 1);
    assert!(matches!(
        bootstrap_compare(&a[..19], &b, &truth, MetricKind::Rmse, 100, 0),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 0, 0).is_err());
    assert!(matches!(
        bootstrap_compare(&a, &b, &[1.0; 20], MetricKind::RocAuc, 100, 0),
        Err(Error::SingleClass(_))
    ));
}
