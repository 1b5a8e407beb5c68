//! Paired bootstrap comparison of two predictors on a shared test set.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::rng::rng_for;

pub const DEFAULT_N_BOOT: usize = 10_000;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub metric: MetricKind,
    /// Metric of each predictor on the full test set.
    pub metric_a: f64,
    pub metric_b: f64,
    /// Share of resamples on which `b` beats `a`, ties counting one half.
    pub p_value: f64,
    pub n_boot: usize,
    pub b_better: usize,
    pub ties: usize,
    pub seed: u64,
}

enum Outcome {
    ABetter,
    BBetter,
    Tie,
}

/// `p = (#{b strictly better} + #{ties}/2) / n_boot`. Resample `k` draws
/// from its own stream derived from `(seed, k)`; for AUC metrics a resample
/// missing a class is redrawn from the same stream.
pub fn bootstrap_compare(
    pred_a: &[f64],
    pred_b: &[f64],
    truth: &[f64],
    metric: MetricKind,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    let n = truth.len();
    for p in [pred_a, pred_b] {
        if p.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: p.len(),
            });
        }
    }
    if n < 10 {
        return Err(Error::TooFewRows { needed: 10, got: n });
    }
    if n_boot == 0 {
        return Err(Error::invalid("n_boot must be at least 1"));
    }
    let needs_both = metric.higher_is_better();
    if needs_both {
        let ones = truth.iter().filter(|t| **t == 1.0).count();
        if ones == 0 || ones == n {
            return Err(Error::SingleClass("bootstrap truth".into()));
        }
    }
    let metric_a = metric.evaluate(pred_a, truth)?.value;
    let metric_b = metric.evaluate(pred_b, truth)?.value;

    let outcomes: Vec<Outcome> = (0..n_boot)
        .into_par_iter()
        .map(|k| -> Result<Outcome> {
            let mut rng = rng_for(seed, k as u64);
            let mut idx = vec![0usize; n];
            let mut draws = 0;
            loop {
                for v in idx.iter_mut() {
                    *v = rng.random_range(0..n);
                }
                draws += 1;
                if !needs_both || has_both_classes(&idx, truth) {
                    break;
                }
                if draws >= MAX_REDRAWS {
                    return Err(Error::Resample(format!(
                        "resample {k} lacked a class after {MAX_REDRAWS} draws"
                    )));
                }
            }
            let t: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
            let a: Vec<f64> = idx.iter().map(|&i| pred_a[i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| pred_b[i]).collect();
            let ma = metric.evaluate(&a, &t)?.value;
            let mb = metric.evaluate(&b, &t)?.value;
            Ok(if ma == mb {
                Outcome::Tie
            } else if metric.better(mb, ma) {
                Outcome::BBetter
            } else {
                Outcome::ABetter
            })
        })
        .collect::<Result<_>>()?;
    let b_better = outcomes.iter().filter(|o| matches!(o, Outcome::BBetter)).count();
    let ties = outcomes.iter().filter(|o| matches!(o, Outcome::Tie)).count();
    Ok(BootstrapResult {
        metric,
        metric_a,
        metric_b,
        p_value: (b_better as f64 + 0.5 * ties as f64) / n_boot as f64,
        n_boot,
        b_better,
        ties,
        seed,
    })
}

fn has_both_classes(idx: &[usize], truth: &[f64]) -> bool {
    let first = truth[idx[0]];
    idx.iter().any(|&i| truth[i] != first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_predictions_give_one_half() {
        let truth: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let pred: Vec<f64> = truth.iter().map(|v| v + 0.3 * (v * 1.7).sin()).collect();
        let r = bootstrap_compare(&pred, &pred, &truth, MetricKind::Rmse, 500, 1).unwrap();
        assert_eq!(r.p_value, 0.5);
    }

    #[test]
    fn perfect_beats_reversed() {
        let truth: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let reversed: Vec<f64> = truth.iter().rev().copied().collect();
        let r = bootstrap_compare(&truth, &reversed, &truth, MetricKind::Rmse, 1000, 3).unwrap();
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn errors() {
        let t = vec![0.0; 12];
        assert!(matches!(
            bootstrap_compare(&t, &t, &t, MetricKind::RocAuc, 10, 0),
            Err(Error::SingleClass(_))
        ));
        assert!(bootstrap_compare(&t[..11], &t, &t, MetricKind::Mae, 10, 0).is_err());
    }
}
