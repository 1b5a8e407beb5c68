//! Evaluation and weighting metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "RMSE")]
    Rmse,
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "ROC-AUC")]
    RocAuc,
    #[serde(rename = "PRC-AUC")]
    PrcAuc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Mae => "MAE",
            MetricKind::Rmse => "RMSE",
            MetricKind::Mse => "MSE",
            MetricKind::RocAuc => "ROC-AUC",
            MetricKind::PrcAuc => "PRC-AUC",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::RocAuc | MetricKind::PrcAuc)
    }

    pub fn task(self) -> Task {
        if self.higher_is_better() {
            Task::Classification
        } else {
            Task::Regression
        }
    }

    /// True when `a` is strictly better than `b` under this metric.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }

    /// Computes this metric for predictions (or scores) against truth.
    pub fn evaluate(self, pred: &[f64], truth: &[f64]) -> Result<MetricValue> {
        match self {
            MetricKind::Mae | MetricKind::Rmse | MetricKind::Mse => regression_error(pred, truth, self),
            MetricKind::RocAuc => roc_auc(pred, truth),
            MetricKind::PrcAuc => prc_auc(pred, truth),
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mae" => Ok(MetricKind::Mae),
            "rmse" => Ok(MetricKind::Rmse),
            "mse" => Ok(MetricKind::Mse),
            "roc" | "roc-auc" | "auc" => Ok(MetricKind::RocAuc),
            "prc" | "prc-auc" | "ap" => Ok(MetricKind::PrcAuc),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
    pub n: usize,
}

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("metric on empty input"));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

pub fn regression_error(pred: &[f64], truth: &[f64], kind: MetricKind) -> Result<MetricValue> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    let value = match kind {
        MetricKind::Mae => pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n,
        MetricKind::Mse | MetricKind::Rmse => {
            let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
            if kind == MetricKind::Rmse {
                mse.sqrt()
            } else {
                mse
            }
        }
        _ => return Err(Error::invalid(format!("{kind} is not a regression error"))),
    };
    Ok(MetricValue {
        kind,
        value,
        n: pred.len(),
    })
}

fn class_counts(labels: &[f64]) -> Result<(usize, usize)> {
    let mut pos = 0;
    let mut neg = 0;
    for &l in labels {
        if l == 1.0 {
            pos += 1;
        } else if l == 0.0 {
            neg += 1;
        } else {
            return Err(Error::invalid(format!("label {l} is not 0 or 1")));
        }
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the Mann–Whitney statistic, with ties
/// counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<MetricValue> {
    check_pair(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("ROC-AUC labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Counted in half-units so the numerator stays an exact integer.
    let mut half_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let (mut p_tie, mut n_tie) = (0u64, 0u64);
        for &k in &order[i..j] {
            if labels[k] == 1.0 {
                p_tie += 1;
            } else {
                n_tie += 1;
            }
        }
        half_wins += 2 * p_tie * neg_below + p_tie * n_tie;
        neg_below += n_tie;
        i = j;
    }
    let value = half_wins as f64 / (2 * pos as u64 * neg as u64) as f64;
    Ok(MetricValue {
        kind: MetricKind::RocAuc,
        value,
        n: scores.len(),
    })
}

/// Average precision: step-interpolated area under the precision–recall
/// curve. Items are ranked by descending score; equal scores keep their
/// input order.
pub fn prc_auc(scores: &[f64], labels: &[f64]) -> Result<MetricValue> {
    check_pair(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    if pos == 0 {
        return Err(Error::invalid("PRC-AUC needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] == 1.0 {
            tp += 1;
            sum += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(MetricValue {
        kind: MetricKind::PrcAuc,
        value: sum / pos as f64,
        n: scores.len(),
    })
}

/// PRC-AUC when the minority class holds strictly less than `threshold` of
/// the labels, ROC-AUC otherwise.
pub fn select_weight_metric(labels: &[f64], threshold: f64) -> Result<MetricKind> {
    let (pos, neg) = class_counts(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("weighting labels".into()));
    }
    let minority = pos.min(neg) as f64 / labels.len() as f64;
    Ok(if minority < threshold {
        MetricKind::PrcAuc
    } else {
        MetricKind::RocAuc
    })
}

/// Geometric mean for regression errors, arithmetic mean for AUCs.
pub fn aggregate_multi_target(values: &[f64], task: Task) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty metric list"));
    }
    let n = values.len() as f64;
    match task {
        Task::Regression => {
            if let Some(v) = values.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!("geometric mean needs non-negative values, got {v}")));
            }
            // a perfect target pulls the geometric mean to its limit, zero
            if values.contains(&0.0) {
                return Ok(0.0);
            }
            Ok((values.iter().map(|v| v.ln()).sum::<f64>() / n).exp())
        }
        Task::Classification => Ok(values.iter().sum::<f64>() / n),
    }
}

/// Correlation-weighted count of data points relevant to each target of a
/// sparse multi-target matrix (`targets[column][row]`).
///
/// `eff_i = sum_j |r_ij| * count_j`, with `r_ii = 1`. Pairs sharing fewer
/// than three rows, and pairs involving a column that is constant over its
/// present rows, contribute nothing.
pub fn effective_sample_size(targets: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::invalid("no target columns"));
    }
    let n_rows = targets[0].len();
    if let Some(c) = targets.iter().find(|c| c.len() != n_rows) {
        return Err(Error::LengthMismatch {
            expected: n_rows,
            actual: c.len(),
        });
    }
    let counts: Vec<usize> = targets.iter().map(|c| c.iter().flatten().count()).collect();
    if let Some(&c) = counts.iter().find(|&&c| c < 2) {
        return Err(Error::TooFewRows { needed: 2, got: c });
    }
    let degenerate: Vec<bool> = targets
        .iter()
        .map(|c| {
            let mut present = c.iter().flatten();
            let first = *present.next().unwrap();
            present.all(|&v| v == first)
        })
        .collect();
    let t = targets.len();
    let mut eff = vec![0.0; t];
    for i in 0..t {
        eff[i] += counts[i] as f64;
        for j in (i + 1)..t {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let r = pairwise_pearson(&targets[i], &targets[j]).unwrap_or(0.0).abs();
            eff[i] += r * counts[j] as f64;
            eff[j] += r * counts[i] as f64;
        }
    }
    Ok(eff)
}

fn pairwise_pearson(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
