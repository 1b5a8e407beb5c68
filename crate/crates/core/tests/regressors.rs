use metamodel_core::learners::linear::{fit_lasso, fit_ridge};
use metamodel_core::learners::neural::{Architecture, NetLoss, Network};
use metamodel_core::learners::regression::{regressor_variance, RegressorModel};
use metamodel_core::learners::{fit_regressor, predict_regressor, regressor_importance, RegressorKind, RegressorSpec};
use metamodel_core::linalg::gaussian_kernel;
use metamodel_core::rng::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_matrix(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))
}

fn gauss(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

fn spec(kind: RegressorKind) -> RegressorSpec {
    RegressorSpec::new(kind, 3)
}

/// Least squares with an intercept by modified Gram-Schmidt QR and back
/// substitution; returns (intercept, coefficients).
fn least_squares_oracle(x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let m = x.ncols() + 1;
    let mut q: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| if j == 0 { 1.0 } else { x[(i, j - 1)] }).collect())
        .collect();
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in 0..j {
            let d: f64 = (0..n).map(|i| q[k][i] * q[j][i]).sum();
            r[k][j] = d;
            for i in 0..n {
                q[j][i] -= d * q[k][i];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j][j] = norm;
        for v in q[j].iter_mut() {
            *v /= norm;
        }
    }
    let qty: Vec<f64> = (0..m).map(|j| (0..n).map(|i| q[j][i] * y[i]).sum()).collect();
    let mut beta = vec![0.0; m];
    for j in (0..m).rev() {
        let s: f64 = ((j + 1)..m).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    (beta[0], beta[1..].to_vec())
}

#[test]
fn ridge_without_penalty_matches_least_squares() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let x = normal_matrix(seed, 50, 5);
        let mut r = rng(1000 + seed);
        let y: Vec<f64> = (0..50)
            .map(|i| {
                (0..5).map(|j| (j as f64 - 2.0) * x[(i, j)]).sum::<f64>()
                    + 0.7
                    + 0.3 * gauss(&mut r)
            })
            .collect();
        let model = fit_ridge(&x, &y, 0.0).unwrap();
        let (b0, b) = least_squares_oracle(&x, &y);
        let scale = b.iter().fold(b0.abs(), |m, v| m.max(v.abs()));
        worst = worst.max((model.intercept - b0).abs() / scale);
        for j in 0..5 {
            worst = worst.max((model.coef[j] - b[j]).abs() / scale);
        }
    }
    assert!(worst < 1e-6, "worst relative deviation {worst}");
}

#[test]
fn ridge_recovers_noiseless_slope() {
    let x = DMatrix::from_fn(20, 1, |i, _| i as f64 / 3.0 - 2.0);
    let y: Vec<f64> = (0..20).map(|i| 2.0 * x[(i, 0)]).collect();
    let m = fit_regressor(&spec(RegressorKind::Ridge).with_param("alpha", 1e-8).unwrap(), &x, &y).unwrap();
    let RegressorModel::Linear(lin) = &m.model else { panic!("ridge is linear") };
    assert!((lin.coef[0] - 2.0).abs() < 1e-4);
}

/// Lasso objective on internally standardised columns, recomputed from the
/// returned input-space coefficients.
fn lasso_objective(x: &DMatrix<f64>, y: &[f64], coef: &[f64], intercept: f64, alpha: f64) -> f64 {
    let n = x.nrows() as f64;
    let mut penalty = 0.0;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        penalty += (coef[j] * sd).abs();
    }
    let rss: f64 = (0..x.nrows())
        .map(|i| {
            let f = intercept + (0..x.ncols()).map(|j| coef[j] * x[(i, j)]).sum::<f64>();
            (y[i] - f).powi(2)
        })
        .sum();
    rss / (2.0 * n) + alpha * penalty
}

#[test]
fn lasso_objective_never_increases() {
    for seed in 0..20 {
        let x = normal_matrix(seed, 80, 12);
        let mut r = rng(seed + 77);
        let y: Vec<f64> = (0..80)
            .map(|i| 3.0 * x[(i, 0)] - 2.0 * x[(i, 5)] + x[(i, 1)] * x[(i, 2)] + gauss(&mut r))
            .collect();
        let alpha = [0.001, 0.01, 0.1, 0.5][seed as usize % 4];
        let fit = fit_lasso(&x, &y, alpha, 1e-10, 10_000);
        let start = lasso_objective(&x, &y, &vec![0.0; 12], y.iter().sum::<f64>() / 80.0, alpha);
        assert!(fit.objective[0] <= start + 1e-12);
        for w in fit.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
        }
        let last = *fit.objective.last().unwrap();
        let recomputed = lasso_objective(&x, &y, &fit.model.coef, fit.model.intercept, alpha);
        assert!((last - recomputed).abs() < 1e-9 * last.max(1.0));
    }
}

#[test]
fn lasso_full_shrinkage_predicts_the_mean() {
    let x = normal_matrix(4, 40, 3);
    let y: Vec<f64> = (0..40).map(|i| x[(i, 0)] + 5.0).collect();
    let m = fit_regressor(&spec(RegressorKind::Lasso).with_param("alpha", 1e6).unwrap(), &x, &y).unwrap();
    let mean = y.iter().sum::<f64>() / 40.0;
    for p in predict_regressor(&m, &x).unwrap() {
        assert!((p - mean).abs() < 1e-12);
    }
    assert_eq!(regressor_importance(&m).unwrap(), vec![0.0; 3]);
}

#[test]
fn boosting_training_loss_never_increases() {
    let x = normal_matrix(8, 150, 4);
    let y: Vec<f64> = (0..150).map(|i| (2.0 * x[(i, 0)]).sin() + x[(i, 1)].abs()).collect();
    let s = spec(RegressorKind::GradientBoostedTrees).with_param("n_stages", 60.0).unwrap();
    let m = fit_regressor(&s, &x, &y).unwrap();
    let RegressorModel::Boosting(b) = &m.model else { panic!("boosting model") };
    let loss = b.training_loss();
    assert_eq!(loss.len(), 61);
    for w in loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(loss[60] < 0.1 * loss[0]);
}

#[test]
fn gp_interpolates_and_matches_direct_solve() {
    let x = normal_matrix(21, 30, 2);
    let y: Vec<f64> = (0..30).map(|i| x[(i, 0)].sin() + 0.5 * x[(i, 1)]).collect();
    let bw = 0.8;
    let noise = 1e-8;
    let s = spec(RegressorKind::GaussianProcess)
        .with_param("noise", noise)
        .unwrap()
        .with_param("bandwidth", bw)
        .unwrap();
    let m = fit_regressor(&s, &x, &y).unwrap();
    for (p, t) in predict_regressor(&m, &x).unwrap().iter().zip(&y) {
        assert!((p - t).abs() < 1e-3);
    }

    // direct kernel evaluation and LU solve
    let k_of = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            let d2: f64 = (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum();
            (-d2 / (2.0 * bw * bw)).exp()
        })
    };
    let mean = y.iter().sum::<f64>() / 30.0;
    let mut k = k_of(&x, &x);
    for i in 0..30 {
        k[(i, i)] += noise;
    }
    let alpha = k.lu().solve(&DVector::from_iterator(30, y.iter().map(|v| v - mean))).unwrap();
    let probe = normal_matrix(22, 10, 2);
    let expected = k_of(&probe, &x) * alpha;
    for (p, e) in predict_regressor(&m, &probe).unwrap().iter().zip(expected.iter()) {
        assert!((p - (e + mean)).abs() < 1e-5 * (1.0 + e.abs()), "{p} vs {}", e + mean);
    }
    // library kernel agrees with the direct evaluation
    let sq = DMatrix::from_fn(30, 30, |i, j| (0..2).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum::<f64>());
    assert!((gaussian_kernel(&sq, bw) - k_of(&x, &x)).abs().max() < 1e-14);
}

#[test]
fn gp_variance_contracts_at_training_points() {
    let x = normal_matrix(5, 60, 3);
    let y: Vec<f64> = (0..60).map(|i| x[(i, 0)] * x[(i, 1)]).collect();
    for noise in [1e-2, 1e-1, 1.0] {
        let s = spec(RegressorKind::GaussianProcess).with_param("noise", noise).unwrap();
        let m = fit_regressor(&s, &x, &y).unwrap();
        let var = regressor_variance(&m, &x).unwrap();
        for v in var {
            assert!(v <= noise + 1e-9, "variance {v} above noise {noise}");
        }
    }
}

fn check_probe_gradient(net: &mut Network, n_in: usize, seed: u64) {
    let mut r = rng(seed);
    let flat: Vec<f64> = (0..net.n_params()).map(|_| r.random_range(-1.0..1.0)).collect();
    net.set_params(&flat);
    let x = DMatrix::from_fn(8, n_in, |_, _| r.random_range(-2.0..2.0));
    let y: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
    let (_, grad) = net.loss_and_gradient(&x, &y);
    let h = 1e-6;
    for k in 0..flat.len() {
        let mut p = flat.clone();
        p[k] += h;
        net.set_params(&p);
        let up = net.loss(&x, &y);
        p[k] -= 2.0 * h;
        net.set_params(&p);
        let down = net.loss(&x, &y);
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grad[k].abs()).max(1e-6);
        assert!((fd - grad[k]).abs() <= 1e-4 * scale, "param {k}: fd {fd} vs analytic {}", grad[k]);
    }
    net.set_params(&flat);
}

#[test]
fn network_gradients_match_central_differences() {
    for loss in [NetLoss::SquaredError, NetLoss::Logistic] {
        for seed in 0..5 {
            // 1 input, one hidden layer of 3: 3 + 3 + 3 + 1 = 10 parameters
            let mut mlp = Network::mlp(loss, 1, 3, 1, &mut rng(seed));
            assert_eq!(mlp.n_params(), 10);
            check_probe_gradient(&mut mlp, 1, 100 + seed);
            let mut res = Network::resnet(loss, 1, 2, 1, &mut rng(seed));
            assert!(res.n_params() <= 15);
            check_probe_gradient(&mut res, 1, 200 + seed);
            let mut deep = Network::new(Architecture::ResNet, loss, 2, &[3, 3, 3], &mut rng(seed));
            check_probe_gradient(&mut deep, 2, 300 + seed);
        }
    }
}

#[test]
fn nearest_neighbour_and_interpolants_reproduce_training_points() {
    let x = normal_matrix(9, 40, 3);
    let y: Vec<f64> = (0..40).map(|i| x[(i, 0)] - 2.0 * x[(i, 2)] + x[(i, 1)].powi(2)).collect();
    let knn = fit_regressor(&spec(RegressorKind::Knn).with_param("k", 1.0).unwrap(), &x, &y).unwrap();
    assert_eq!(predict_regressor(&knn, &x).unwrap(), y);

    let rf = spec(RegressorKind::RandomForest).with_param("bootstrap", 0.0).unwrap();
    let rf = fit_regressor(&rf, &x, &y).unwrap();
    for (p, t) in predict_regressor(&rf, &x).unwrap().iter().zip(&y) {
        assert!((p - t).abs() < 1e-9);
    }

    let rbf = spec(RegressorKind::RbfInterpolation).with_param("smoothing", 0.0).unwrap();
    let rbf = fit_regressor(&rbf, &x, &y).unwrap();
    for (p, t) in predict_regressor(&rbf, &x).unwrap().iter().zip(&y) {
        assert!((p - t).abs() < 1e-6);
    }
}

#[test]
fn builtin_importances() {
    let x = normal_matrix(12, 60, 2);
    let y: Vec<f64> = (0..60).map(|i| 3.0 * x[(i, 0)]).collect();
    let ridge = fit_regressor(&spec(RegressorKind::Ridge), &x, &y).unwrap();
    let imp = regressor_importance(&ridge).unwrap();
    assert!(imp[0] > imp[1]);

    let knn = fit_regressor(&spec(RegressorKind::Knn), &x, &y).unwrap();
    assert!(regressor_importance(&knn).is_none());

    let x = normal_matrix(13, 100, 4);
    let y: Vec<f64> = (0..100).map(|i| (x[(i, 2)] > 0.1) as u8 as f64).collect();
    let gbt = spec(RegressorKind::GradientBoostedTrees).with_param("n_stages", 50.0).unwrap();
    let imp = regressor_importance(&fit_regressor(&gbt, &x, &y).unwrap()).unwrap();
    let total: f64 = imp.iter().sum();
    assert!(imp[2] / total > 0.9, "{imp:?}");
}

#[test]
fn every_regressor_is_deterministic() {
    let x = normal_matrix(30, 90, 4);
    let y: Vec<f64> = (0..90).map(|i| x[(i, 0)].sin() + x[(i, 1)] * x[(i, 3)]).collect();
    let probe = normal_matrix(31, 15, 4);
    for kind in RegressorKind::ALL {
        let mut s = RegressorSpec::new(kind, 5);
        if matches!(kind, RegressorKind::Mlp | RegressorKind::Resnet) {
            s = s.with_param("width", 16.0).unwrap().with_param("max_epochs", 30.0).unwrap();
        }
        let a = predict_regressor(&fit_regressor(&s, &x, &y).unwrap(), &probe).unwrap();
        let b = predict_regressor(&fit_regressor(&s, &x, &y).unwrap(), &probe).unwrap();
        assert_eq!(a, b, "{kind}");
        assert!(a.iter().all(|v| v.is_finite()), "{kind}");
    }
}

#[test]
fn rejects_bad_inputs() {
    let x = normal_matrix(1, 20, 2);
    let y = vec![1.0; 19];
    assert!(fit_regressor(&spec(RegressorKind::Ridge), &x, &y).is_err());
    let mut bad = x.clone();
    bad[(3, 1)] = f64::INFINITY;
    assert!(fit_regressor(&spec(RegressorKind::Ridge), &bad, &[0.5; 20]).is_err());
    let m = fit_regressor(&spec(RegressorKind::Ridge), &x, &[0.5; 20]).unwrap();
    assert!(predict_regressor(&m, &normal_matrix(2, 5, 3)).is_err());
    assert!(spec(RegressorKind::Knn).with_param("k", 0.0).is_err());
    assert!(spec(RegressorKind::Knn).with_param("depth", 3.0).is_err());
}
