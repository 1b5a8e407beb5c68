//! Feature importances: permutation importance, normalisation and weighted
//! aggregation across sub-models.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Predictor;
use crate::metrics::MetricKind;
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl ImportanceVector {
    pub fn new(feature_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if feature_names.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: feature_names.len(),
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("importance values must be finite and non-negative, got {v}")));
        }
        Ok(ImportanceVector {
            feature_names,
            values,
            normalized: false,
        })
    }

    /// Feature names ordered by decreasing importance (stable for ties).
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx.into_iter().map(|i| self.feature_names[i].as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.feature_names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Divides by the sum; an all-zero vector becomes uniform.
pub fn normalize_importance(v: &ImportanceVector) -> Result<ImportanceVector> {
    if let Some(x) = v.values.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::invalid(format!("negative importance {x}")));
    }
    let total: f64 = v.values.iter().sum();
    let k = v.values.len() as f64;
    let values = if total > 0.0 {
        v.values.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / k; v.values.len()]
    };
    Ok(ImportanceVector {
        feature_names: v.feature_names.clone(),
        values,
        normalized: true,
    })
}

/// Weighted mean of normalised vectors over a common feature list.
pub fn aggregate_importance(vectors: &[ImportanceVector], weights: &[f64]) -> Result<ImportanceVector> {
    if vectors.is_empty() || vectors.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: vectors.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("aggregation weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("aggregation weights sum to zero"));
    }
    let names = &vectors[0].feature_names;
    let mut out = vec![0.0; names.len()];
    for (v, w) in vectors.iter().zip(weights) {
        if &v.feature_names != names {
            return Err(Error::ColumnMismatch("importance vectors cover different features".into()));
        }
        let v = normalize_importance(v)?;
        for (acc, x) in out.iter_mut().zip(&v.values) {
            *acc += w * x;
        }
    }
    for x in &mut out {
        *x /= total;
    }
    normalize_importance(&ImportanceVector {
        feature_names: names.clone(),
        values: out,
        normalized: false,
    })
}

/// Mean degradation of `metric` when each column of `x_val` is shuffled,
/// clamped at zero. Column `j` uses its own seeded stream, so the result does
/// not depend on scheduling.
pub fn permutation_importance(
    model: &dyn Predictor,
    x_val: &DMatrix<f64>,
    y_val: &[f64],
    metric: MetricKind,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    if x_val.nrows() < 10 {
        return Err(Error::TooFewRows {
            needed: 10,
            got: x_val.nrows(),
        });
    }
    permutation_importance_unchecked(model, x_val, y_val, metric, repeats, seed)
}

/// As [`permutation_importance`] but without the minimum-row check, for
/// small validation sets inside the ensemble pipeline.
pub(crate) fn permutation_importance_unchecked(
    model: &dyn Predictor,
    x_val: &DMatrix<f64>,
    y_val: &[f64],
    metric: MetricKind,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    if repeats == 0 {
        return Err(Error::invalid("permutation repeats must be at least 1"));
    }
    if x_val.nrows() == 0 {
        return Err(Error::invalid("empty validation set"));
    }
    if x_val.ncols() != model.n_features() {
        return Err(Error::LengthMismatch {
            expected: model.n_features(),
            actual: x_val.ncols(),
        });
    }
    let base = metric.evaluate(&model.predict(x_val)?, y_val)?.value;
    let n = x_val.nrows();
    let values: Vec<f64> = (0..x_val.ncols())
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let mut rng = rng_for(seed, j as u64);
            let mut shuffled = x_val.clone();
            let original: Vec<f64> = x_val.column(j).iter().copied().collect();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut total = 0.0;
            for _ in 0..repeats {
                perm.shuffle(&mut rng);
                for (i, &src) in perm.iter().enumerate() {
                    shuffled[(i, j)] = original[src];
                }
                let score = metric.evaluate(&model.predict(&shuffled)?, y_val)?.value;
                total += if metric.higher_is_better() { base - score } else { score - base };
            }
            Ok((total / repeats as f64).max(0.0))
        })
        .collect::<Result<_>>()?;
    ImportanceVector::new(model.feature_names(), values)
}
