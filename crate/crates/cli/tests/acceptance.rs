//! Acceptance gate. Every check prints one `PASS`/`FAIL` line with its
//! runtime and budget, then asserts.
//!
//! Checks run one at a time (a shared lock) so the measured runtimes are not
//! inflated by each other.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use metamodel_core::learners::linear::{fit_lasso, fit_ridge};
use metamodel_core::learners::neural::{Architecture, NetLoss, Network};
use metamodel_core::learners::regression::RegressorModel;
use metamodel_core::learners::{fit_regressor, predict_regressor, LearnerSpec, RegressorKind, RegressorSpec};
use metamodel_core::metrics::{effective_sample_size, prc_auc, regression_error, roc_auc};
use metamodel_core::rng::{derive_seed, rng};
use metamodel_core::significance::bootstrap_compare;
use metamodel_core::synth::{friedman, latent_uplift, two_blobs};
use metamodel_core::tabular::{make_random_split, TargetColumn};
use metamodel_core::{fit_metamodel, metamodel_predict, FeatureTable, MetaModelConfig, MetricKind, Task};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

static SERIAL: Mutex<()> = Mutex::new(());

fn gauss(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

fn run_criterion(name: &str, budget: Option<Duration>, check: impl FnOnce() -> Result<String, String>) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let over = budget.is_some_and(|b| elapsed > b);
    let budget_text = budget.map(|b| format!(" / budget {}s", b.as_secs())).unwrap_or_default();
    let (status, detail) = match (&outcome, over) {
        (Ok(d), false) => ("PASS", d.clone()),
        (Ok(d), true) => ("FAIL", format!("{d}; over time budget")),
        (Err(e), _) => ("FAIL", e.clone()),
    };
    // straight to the process stdout so the line survives libtest output capture
    let line = format!("{status} {name} [{:.1}s{budget_text}] {detail}\n", elapsed.as_secs_f64());
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(status == "PASS", "{name}: {detail}");
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

// ---------------------------------------------------------------- metrics

fn roc_oracle(scores: &[f64], labels: &[f64]) -> f64 {
    let mut half = 0u64;
    let mut pairs = 0u64;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1;
                half += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    half as f64 / (2 * pairs) as f64
}

/// Average precision over positives, ranking by descending score with ties
/// broken by input order.
fn prc_oracle(scores: &[f64], labels: &[f64]) -> f64 {
    let n = scores.len();
    let rank = |i: usize| {
        (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count()
            + 1
    };
    let mut hits: Vec<(usize, f64)> = (0..n)
        .filter(|&i| labels[i] == 1.0)
        .map(|i| {
            let r = rank(i);
            let tp = (0..n).filter(|&j| labels[j] == 1.0 && rank(j) <= r).count();
            (r, tp as f64 / r as f64)
        })
        .collect();
    hits.sort_by_key(|h| h.0);
    hits.iter().map(|h| h.1).sum::<f64>() / hits.len() as f64
}

#[test]
fn metric_oracles() {
    run_criterion("metric-oracles", Some(Duration::from_secs(10)), || {
        let mut r = rng(2001);
        let mut done = 0;
        while done < 500 {
            let n = r.random_range(2..=200);
            // coarse grid for frequent ties on half the instances
            let grid = done % 2 == 0;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    if grid {
                        r.random_range(0..25) as f64 / 4.0
                    } else {
                        gauss(&mut r)
                    }
                })
                .collect();
            let labels: Vec<f64> = (0..n).map(|_| r.random_bool(0.4) as u8 as f64).collect();
            let pos = labels.iter().filter(|l| **l == 1.0).count();
            if pos == 0 || pos == n {
                continue;
            }
            let roc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.value;
            let prc = prc_auc(&scores, &labels).map_err(|e| e.to_string())?.value;
            ensure(roc == roc_oracle(&scores, &labels), || format!("instance {done}: roc {roc}"))?;
            ensure(prc == prc_oracle(&scores, &labels), || format!("instance {done}: prc {prc}"))?;
            done += 1;
        }
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let n = r.random_range(1..300);
            let pred: Vec<f64> = (0..n).map(|_| 100.0 * gauss(&mut r)).collect();
            let truth: Vec<f64> = (0..n).map(|_| 100.0 * gauss(&mut r)).collect();
            let (mut abs, mut sq) = (0.0, 0.0);
            for i in 0..n {
                abs += (pred[i] - truth[i]).abs();
                sq += (pred[i] - truth[i]).powi(2);
            }
            let nf = n as f64;
            for (kind, expected) in [
                (MetricKind::Mae, abs / nf),
                (MetricKind::Mse, sq / nf),
                (MetricKind::Rmse, (sq / nf).sqrt()),
            ] {
                let got = regression_error(&pred, &truth, kind).map_err(|e| e.to_string())?.value;
                worst = worst.max((got - expected).abs() / expected);
            }
        }
        ensure(worst <= 1e-12, || format!("regression relative error {worst:e}"))?;
        Ok(format!("500 ROC/PRC instances exact; regression max rel err {worst:.1e}"))
    });
}

// ---------------------------------------------------------------- learners

fn least_squares_oracle(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    // modified Gram-Schmidt QR on [1 | X]
    let n = x.nrows();
    let m = x.ncols() + 1;
    let mut q: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| if j == 0 { 1.0 } else { x[(i, j - 1)] }).collect())
        .collect();
    let mut rmat = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in 0..j {
            let d: f64 = (0..n).map(|i| q[k][i] * q[j][i]).sum();
            rmat[k][j] = d;
            for i in 0..n {
                q[j][i] -= d * q[k][i];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        rmat[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = (0..m).map(|j| (0..n).map(|i| q[j][i] * y[i]).sum()).collect();
    let mut beta = vec![0.0; m];
    for j in (0..m).rev() {
        let s: f64 = ((j + 1)..m).map(|k| rmat[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - s) / rmat[j][j];
    }
    beta
}

fn gradient_error(net: &mut Network, n_in: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let flat: Vec<f64> = (0..net.n_params()).map(|_| r.random_range(-1.0..1.0)).collect();
    net.set_params(&flat);
    let x = DMatrix::from_fn(8, n_in, |_, _| r.random_range(-2.0..2.0));
    let y: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
    let (_, grad) = net.loss_and_gradient(&x, &y);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
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
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    worst
}

#[test]
fn learner_oracles() {
    run_criterion("learner-oracles", Some(Duration::from_secs(120)), || {
        let e = |e: metamodel_core::Error| e.to_string();
        let mut ridge_worst: f64 = 0.0;
        for seed in 0..100 {
            let mut r = rng(derive_seed(7, seed));
            let x = DMatrix::from_fn(50, 5, |_, _| gauss(&mut r));
            let y: Vec<f64> = (0..50)
                .map(|i| (0..5).map(|j| (j as f64 - 2.0) * x[(i, j)]).sum::<f64>() + 0.7 + 0.3 * gauss(&mut r))
                .collect();
            let fit = fit_ridge(&x, &y, 0.0).map_err(e)?;
            let beta = least_squares_oracle(&x, &y);
            let scale = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            ridge_worst = ridge_worst.max((fit.intercept - beta[0]).abs() / scale);
            for j in 0..5 {
                ridge_worst = ridge_worst.max((fit.coef[j] - beta[j + 1]).abs() / scale);
            }
        }
        ensure(ridge_worst < 1e-6, || format!("ridge deviation {ridge_worst:e}"))?;

        for seed in 0..10 {
            let mut r = rng(derive_seed(8, seed));
            let x = DMatrix::from_fn(80, 12, |_, _| gauss(&mut r));
            let y: Vec<f64> = (0..80).map(|i| 3.0 * x[(i, 0)] - 2.0 * x[(i, 5)] + gauss(&mut r)).collect();
            let fit = fit_lasso(&x, &y, 0.05, 1e-10, 10_000);
            ensure(
                fit.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()),
                || format!("lasso objective rose (seed {seed})"),
            )?;
        }

        let mut r = rng(9);
        let x = DMatrix::from_fn(150, 4, |_, _| gauss(&mut r));
        let y: Vec<f64> = (0..150).map(|i| (2.0 * x[(i, 0)]).sin() + x[(i, 1)].abs()).collect();
        let spec = RegressorSpec::new(RegressorKind::GradientBoostedTrees, 0).with_param("n_stages", 100.0).map_err(e)?;
        let model = fit_regressor(&spec, &x, &y).map_err(e)?;
        let RegressorModel::Boosting(b) = &model.model else {
            return Err("boosting spec produced another model".into());
        };
        ensure(b.training_loss().windows(2).all(|w| w[1] <= w[0] + 1e-12), || "boosting loss rose".into())?;

        let x = DMatrix::from_fn(40, 2, |_, _| gauss(&mut r));
        let y: Vec<f64> = (0..40).map(|i| x[(i, 0)].sin() + 0.5 * x[(i, 1)]).collect();
        let spec = RegressorSpec::new(RegressorKind::GaussianProcess, 0)
            .with_param("noise", 1e-8)
            .and_then(|s| s.with_param("bandwidth", 0.8))
            .map_err(e)?;
        let gp = fit_regressor(&spec, &x, &y).map_err(e)?;
        let gp_err = predict_regressor(&gp, &x)
            .map_err(e)?
            .iter()
            .zip(&y)
            .fold(0.0f64, |m, (p, t)| m.max((p - t).abs()));
        ensure(gp_err < 1e-3, || format!("GP interpolation error {gp_err:e}"))?;

        let mut grad_worst: f64 = 0.0;
        for loss in [NetLoss::SquaredError, NetLoss::Logistic] {
            for seed in 0..5 {
                let mut mlp = Network::mlp(loss, 1, 3, 1, &mut rng(seed));
                grad_worst = grad_worst.max(gradient_error(&mut mlp, 1, 100 + seed));
                let mut res = Network::new(Architecture::ResNet, loss, 2, &[3, 3, 3], &mut rng(seed));
                grad_worst = grad_worst.max(gradient_error(&mut res, 2, 200 + seed));
            }
        }
        ensure(grad_worst <= 1e-4, || format!("gradient relative error {grad_worst:e}"))?;
        Ok(format!(
            "ridge {ridge_worst:.1e}; lasso and boosting monotone; GP {gp_err:.1e}; gradients {grad_worst:.1e}"
        ))
    });
}

// ---------------------------------------------------------------- pipeline

fn reg(kind: RegressorKind, seed: u64, params: &[(&str, f64)]) -> LearnerSpec {
    let mut s = RegressorSpec::new(kind, seed);
    for (k, v) in params {
        s = s.with_param(k, *v).unwrap();
    }
    LearnerSpec::Regression(s)
}

fn cheap_roster() -> Vec<LearnerSpec> {
    (0..3)
        .flat_map(|seed| {
            [
                reg(RegressorKind::Ridge, seed, &[]),
                reg(RegressorKind::Knn, seed, &[]),
                reg(RegressorKind::RandomForest, seed, &[("n_trees", 20.0)]),
                reg(RegressorKind::GradientBoostedTrees, seed, &[("n_stages", 30.0)]),
            ]
        })
        .collect()
}

#[test]
fn pipeline_invariants() {
    run_criterion("pipeline-invariants", Some(Duration::from_secs(120)), || {
        let e = |e: metamodel_core::Error| e.to_string();
        // prune-to-ten, weights, convex bounds
        let (table, y) = friedman(200, 8, 1.0, 1).map_err(e)?;
        let mut cfg = MetaModelConfig::new(Task::Regression).with_seed(1);
        cfg.roster = cheap_roster();
        let m = fit_metamodel(&cfg, &table, &y, None).map_err(e)?;
        ensure(m.slots.len() == 10, || format!("{} slots from 12 candidates", m.slots.len()))?;
        let total: f64 = m.weights().iter().sum();
        ensure((total - 1.0).abs() <= 1e-9, || format!("weights sum to {total}"))?;
        let (probe, _) = friedman(100, 8, 1.0, 2).map_err(e)?;
        let ens = metamodel_predict(&m, &probe).map_err(e)?;
        let per = m.slot_predictions(&probe).map_err(e)?;
        for (i, v) in ens.iter().enumerate() {
            let lo = per.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = per.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
            ensure(*v >= lo - slack && *v <= hi + slack, || format!("row {i} outside slot range"))?;
        }

        // strict threshold: importances near 1, 0.0205, 0.0195, 0.5 against a 2% ratio
        let masks = [1usize, 2, 4, 8];
        let x = DMatrix::from_fn(64, 4, |i, j| if (i & masks[j]).count_ones() % 2 == 0 { 1.0 } else { -1.0 });
        let coef = [1.0, 0.0205, 0.0195, 0.5];
        let yv: Vec<f64> = (0..64).map(|i| (0..4).map(|j| coef[j] * x[(i, j)]).sum()).collect();
        let table = FeatureTable::from_matrix((0..4).map(|j| format!("f_{j}")).collect(), x).map_err(e)?;
        let target = TargetColumn::from_dense("y", Task::Regression, &yv).map_err(e)?;
        let mut cfg = MetaModelConfig::new(Task::Regression);
        cfg.roster = vec![reg(RegressorKind::Ridge, 0, &[("alpha", 1e-12)])];
        cfg.keep_models = 1;
        let m = fit_metamodel(&cfg, &table, &target, None).map_err(e)?;
        ensure(m.pruning.dropped == ["f_2"] && m.features == ["f_0", "f_1", "f_3"], || {
            format!("kept {:?}, dropped {:?}", m.features, m.pruning.dropped)
        })?;

        // leakage over 20 seeded runs
        let (table, y) = friedman(90, 5, 0.5, 5).map_err(e)?;
        for run in 0..20u64 {
            let split = make_random_split(90, [0.7, 0.15, 0.15], run).map_err(e)?;
            let mut cfg = MetaModelConfig::new(Task::Regression).with_seed(run);
            cfg.roster = cheap_roster();
            let m = fit_metamodel(&cfg, &table, &y, Some(&split.test)).map_err(e)?;
            let test: BTreeSet<usize> = split.test.iter().copied().collect();
            for s in &m.slots {
                ensure(s.split.train.iter().chain(&s.split.val).all(|i| !test.contains(i)), || {
                    format!("run {run}: test row inside a slot split")
                })?;
            }
        }
        Ok("10 of 12 kept; weights sum to 1; strict threshold drops f_2 only; convex; no leakage in 20 runs".into())
    });
}

// ---------------------------------------------------------------- ensemble benefit

struct Outcome {
    ensemble: f64,
    worst: f64,
    best: f64,
}

fn test_metrics(
    table: &FeatureTable,
    target: &TargetColumn,
    task: Task,
    metric: MetricKind,
    seed: u64,
) -> Result<Outcome, String> {
    let e = |e: metamodel_core::Error| e.to_string();
    let split = make_random_split(table.n_rows(), [0.8, 0.1, 0.1], seed).map_err(e)?;
    let cfg = MetaModelConfig::new(task).with_seed(seed);
    let m = fit_metamodel(&cfg, table, target, Some(&split.test)).map_err(e)?;
    let test_table = table.select_rows(&split.test);
    let truth = target.dense(&split.test);
    let ensemble = metric.evaluate(&metamodel_predict(&m, &test_table).map_err(e)?, &truth).map_err(e)?.value;
    let slots: Vec<f64> = m
        .slot_predictions(&test_table)
        .map_err(e)?
        .iter()
        .map(|p| metric.evaluate(p, &truth).map(|v| v.value))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let (worst, best) = if metric.higher_is_better() {
        (slots.iter().copied().fold(f64::INFINITY, f64::min), slots.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        (slots.iter().copied().fold(f64::NEG_INFINITY, f64::max), slots.iter().copied().fold(f64::INFINITY, f64::min))
    };
    Ok(Outcome { ensemble, worst, best })
}

fn judge(name: &str, metric: MetricKind, outcomes: &[Outcome]) -> Result<String, String> {
    let ens = median(&outcomes.iter().map(|o| o.ensemble).collect::<Vec<_>>());
    let worst = median(&outcomes.iter().map(|o| o.worst).collect::<Vec<_>>());
    let best = median(&outcomes.iter().map(|o| o.best).collect::<Vec<_>>());
    let (beats_worst, near_best) = if metric.higher_is_better() {
        (ens >= worst, ens >= 0.9 * best)
    } else {
        (ens <= worst, ens <= 1.1 * best)
    };
    let line = format!("{name} median {metric}: ensemble {ens:.4}, worst slot {worst:.4}, best slot {best:.4}");
    ensure(beats_worst && near_best, || line.clone())?;
    Ok(line)
}

#[test]
fn ensemble_benefit() {
    run_criterion("ensemble-benefit", Some(Duration::from_secs(600)), || {
        let e = |e: metamodel_core::Error| e.to_string();
        let mut reg = Vec::new();
        let mut cls = Vec::new();
        for seed in 0..5 {
            let (table, y) = friedman(2000, 20, 1.0, seed).map_err(e)?;
            reg.push(test_metrics(&table, &y, Task::Regression, MetricKind::Rmse, seed)?);
            let (table, y) = two_blobs(2000, 5, 15, 0.8, seed).map_err(e)?;
            cls.push(test_metrics(&table, &y, Task::Classification, MetricKind::RocAuc, seed)?);
        }
        let a = judge("friedman", MetricKind::Rmse, &reg)?;
        let b = judge("two-blob", MetricKind::RocAuc, &cls)?;
        Ok(format!("{a}; {b}"))
    });
}

// ---------------------------------------------------------------- learned-feature uplift

#[test]
fn learned_feature_uplift() {
    run_criterion("learned-feature-uplift", Some(Duration::from_secs(600)), || {
        let e = |e: metamodel_core::Error| e.to_string();
        let mut wins = 0;
        let mut ps = Vec::new();
        let mut detail = Vec::new();
        for seed in 0..5 {
            let mut preds = Vec::new();
            let mut truth = Vec::new();
            for latent in [false, true] {
                let (table, y) = latent_uplift(1000, 12, latent, seed).map_err(e)?;
                let split = make_random_split(1000, [0.8, 0.1, 0.1], seed).map_err(e)?;
                let cfg = MetaModelConfig::new(Task::Regression).with_seed(seed);
                let m = fit_metamodel(&cfg, &table, &y, Some(&split.test)).map_err(e)?;
                preds.push(metamodel_predict(&m, &table.select_rows(&split.test)).map_err(e)?);
                truth = y.dense(&split.test);
            }
            let rmse = |p: &[f64]| regression_error(p, &truth, MetricKind::Rmse).map(|m| m.value);
            let (base, aug) = (rmse(&preds[0]).map_err(e)?, rmse(&preds[1]).map_err(e)?);
            if aug < base {
                wins += 1;
            }
            // small p: the augmented model (a) beats the descriptor-only model (b)
            let p = bootstrap_compare(&preds[1], &preds[0], &truth, MetricKind::Rmse, 2000, seed).map_err(e)?.p_value;
            ps.push(p);
            detail.push(format!("{base:.3}->{aug:.3}"));
        }
        let p = median(&ps);
        let line = format!("RMSE improved in {wins}/5 seeds ({}), median p {p:.4}", detail.join(", "));
        ensure(wins >= 4 && p < 0.1, || line.clone())?;
        Ok(line)
    });
}

// ---------------------------------------------------------------- significance

#[test]
fn significance_calibration() {
    run_criterion("significance-calibration", Some(Duration::from_secs(60)), || {
        let e = |e: metamodel_core::Error| e.to_string();
        let draw = |n: usize, seed: u64| {
            let mut r = rng(seed);
            let truth: Vec<f64> = (0..n).map(|_| gauss(&mut r)).collect();
            let a: Vec<f64> = truth.iter().map(|t| t + 0.5 * gauss(&mut r)).collect();
            let b: Vec<f64> = truth.iter().map(|t| t + 0.5 * gauss(&mut r)).collect();
            (a, b, truth)
        };
        let (a, _, truth) = draw(200, 1);
        let same = bootstrap_compare(&a, &a, &truth, MetricKind::Rmse, 2000, 1).map_err(e)?.p_value;
        ensure(same == 0.5, || format!("identical predictions gave p {same}"))?;

        let mut total = 0.0;
        for s in 0..20 {
            let (a, b, truth) = draw(200, derive_seed(99, s));
            total += bootstrap_compare(&a, &b, &truth, MetricKind::Rmse, 2000, s).map_err(e)?.p_value;
        }
        let mean = total / 20.0;
        ensure((0.4..=0.6).contains(&mean), || format!("equal-quality mean p {mean}"))?;

        let truth: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let (_, noise, _) = draw(200, 5);
        let weak: Vec<f64> = truth.iter().zip(&noise).map(|(t, n)| t + 20.0 * n).collect();
        let dominant = bootstrap_compare(&truth, &weak, &truth, MetricKind::Rmse, 2000, 3).map_err(e)?.p_value;
        ensure(dominant < 0.01, || format!("dominant model p {dominant}"))?;
        Ok(format!("identical p 0.5; equal-quality mean p {mean:.3}; dominant p {dominant}"))
    });
}

// ---------------------------------------------------------------- determinism

fn run_cli(args: &[&str], workers: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_metamodel"))
        .args(args)
        .env("METAMODEL_WORKERS", workers)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn train_and_evaluate(dir: &Path, workers: &str) -> Result<Vec<u8>, String> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/friedman_small.csv");
    let d = dir.to_str().unwrap();
    run_cli(&["train", "--data", data, "--target", "y", "--seed", "11", "--out", d], workers)?;
    let model = format!("{d}/model_y.mmdl");
    let split = format!("{d}/split.csv");
    let eval = format!("{d}/eval");
    run_cli(&["evaluate", "--model", &model, "--data", data, "--split-file", &split, "--out", &eval], workers)?;
    std::fs::read(dir.join("eval/predictions.csv")).map_err(|e| e.to_string())
}

#[test]
fn determinism_across_worker_counts() {
    run_criterion("determinism", None, || {
        let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
        let runs = [("1", "w1a"), ("1", "w1b"), ("8", "w8a"), ("8", "w8b")];
        let mut files = Vec::new();
        for (workers, name) in runs {
            files.push(train_and_evaluate(&tmp.path().join(name), workers)?);
        }
        ensure(files.windows(2).all(|w| w[0] == w[1]), || "prediction files differ".into())?;
        let model = |n: &str| std::fs::read(tmp.path().join(n).join("model_y.mmdl")).unwrap();
        ensure(model("w1a") == model("w8b"), || "model files differ".into())?;
        Ok(format!("4 runs (workers 1,1,8,8) gave identical {}-byte prediction files", files[0].len()))
    });
}

// ---------------------------------------------------------------- effective sample size

#[test]
fn effective_sample_size_cases() {
    run_criterion("effective-sample-size", None, || {
        let e = |e: metamodel_core::Error| e.to_string();
        let mut r = rng(17);
        let col: Vec<Option<f64>> = (0..300).map(|_| Some(gauss(&mut r))).collect();
        let single = effective_sample_size(std::slice::from_ref(&col)).map_err(e)?;
        ensure(single == [300.0], || format!("single column {single:?}"))?;
        let dup = effective_sample_size(&[col.clone(), col]).map_err(e)?;
        ensure(dup == [600.0, 600.0], || format!("duplicated column {dup:?}"))?;
        let cols: Vec<Vec<Option<f64>>> = (0..3).map(|_| (0..1000).map(|_| Some(gauss(&mut r))).collect()).collect();
        let indep = effective_sample_size(&cols).map_err(e)?;
        ensure(indep.iter().all(|v| (v / 1000.0 - 1.0).abs() <= 0.1), || format!("independent {indep:?}"))?;
        Ok(format!("single 300, duplicated 600, independent {:?}", indep.iter().map(|v| v.round()).collect::<Vec<_>>()))
    });
}
