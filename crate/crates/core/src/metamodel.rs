//! The ensemble: per-slot splits, fit, score, prune to the best slots, prune
//! features, retrain and average with score-derived weights.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::{aggregate_importance, normalize_importance, permutation_importance_unchecked, ImportanceVector};
use crate::learners::{ClassifierKind, ClassifierSpec, LearnerSpec, Predictor, RegressorKind, RegressorSpec, TrainedLearner};
use crate::metrics::{select_weight_metric, MetricKind, MetricValue};
use crate::rng::derive_seed;
use crate::tabular::{
    apply_scaler, filter_columns, fit_scaler, make_train_val_split, ColumnFilterReport, DataSplit, FeatureTable,
    ScalerParams, TargetColumn, Task,
};

/// Fewest rows with a present target that the pipeline accepts.
pub const MIN_ROWS: usize = 30;
/// Floor applied to validation MSE before inverting it into a weight.
pub const MSE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModelConfig {
    pub task: Task,
    pub roster: Vec<LearnerSpec>,
    pub keep_models: usize,
    /// Features survive pruning when their aggregated importance is strictly
    /// greater than this fraction of the largest importance.
    pub feature_keep_ratio: f64,
    /// (train, val, test) fractions; train and val set each slot's
    /// validation share of the pooled region.
    pub split_fractions: [f64; 3],
    pub seed: u64,
    /// Minority-class share below which PRC-AUC replaces ROC-AUC.
    pub minority_threshold: f64,
    pub importance_repeats: usize,
    /// Optional cap on the share of retained slots of any single kind.
    pub max_class_fraction: Option<f64>,
}

impl MetaModelConfig {
    pub fn new(task: Task) -> Self {
        MetaModelConfig {
            task,
            roster: default_roster(task),
            keep_models: 10,
            feature_keep_ratio: 0.02,
            split_fractions: [0.8, 0.1, 0.1],
            seed: 0,
            minority_threshold: 0.10,
            importance_repeats: 5,
            max_class_fraction: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::invalid("roster is empty"));
        }
        if self.keep_models == 0 {
            return Err(Error::invalid("keep_models must be at least 1"));
        }
        if !(self.feature_keep_ratio > 0.0 && self.feature_keep_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "feature_keep_ratio {} not in (0,1)",
                self.feature_keep_ratio
            )));
        }
        let [tr, va, te] = self.split_fractions;
        if !(tr > 0.0 && va > 0.0 && te >= 0.0 && (tr + va + te - 1.0).abs() < 1e-9) {
            return Err(Error::Split(format!(
                "split fractions {:?} must be positive (test may be 0) and sum to 1",
                self.split_fractions
            )));
        }
        if !(self.minority_threshold > 0.0 && self.minority_threshold < 0.5) {
            return Err(Error::invalid("minority_threshold must be in (0, 0.5)"));
        }
        if self.importance_repeats == 0 {
            return Err(Error::invalid("importance_repeats must be at least 1"));
        }
        if let Some(f) = self.max_class_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid("max_class_fraction must be in (0, 1]"));
            }
        }
        for spec in &self.roster {
            if spec.task() != self.task {
                return Err(Error::invalid(format!(
                    "roster entry {} is a {} learner in a {} ensemble",
                    spec.kind_name(),
                    spec.task(),
                    self.task
                )));
            }
            spec.validate()?;
        }
        Ok(())
    }

    fn val_fraction(&self) -> f64 {
        let [tr, va, _] = self.split_fractions;
        va / (tr + va)
    }
}

/// Two instances of every catalogue kind, distinguished by their seed.
pub fn default_roster(task: Task) -> Vec<LearnerSpec> {
    let mut roster = Vec::with_capacity(20);
    for seed in 0..2 {
        match task {
            Task::Regression => roster.extend(
                RegressorKind::ALL
                    .into_iter()
                    .map(|k| LearnerSpec::Regression(RegressorSpec::new(k, seed))),
            ),
            Task::Classification => roster.extend(
                ClassifierKind::ALL
                    .into_iter()
                    .map(|k| LearnerSpec::Classification(ClassifierSpec::new(k, seed))),
            ),
        }
    }
    roster
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubModelSlot {
    pub spec: LearnerSpec,
    /// Position in the roster.
    pub roster_index: usize,
    pub split_seed: u64,
    pub learner_seed: u64,
    /// Row indices into the fitted table; `test` holds the held-out rows.
    pub split: DataSplit,
    pub score: MetricValue,
    pub weight: f64,
    pub model: TrainedLearner,
    /// Normalised importance of the retrained model over the retained
    /// features.
    pub importance: ImportanceVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Retained,
    Discarded,
    Failed(String),
}

/// First-round outcome for one roster entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: String,
    pub roster_index: usize,
    pub split_seed: u64,
    pub score: Option<f64>,
    pub status: CandidateStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePruning {
    /// Aggregated importance of the first-round retained slots.
    pub importance: ImportanceVector,
    pub threshold: f64,
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaModel {
    pub config: MetaModelConfig,
    pub task: Task,
    pub target_name: String,
    pub metric: MetricKind,
    pub slots: Vec<SubModelSlot>,
    pub features: Vec<String>,
    /// Scaler restricted to `features`.
    pub scaler: ScalerParams,
    pub filter_report: ColumnFilterReport,
    pub candidates: Vec<Candidate>,
    pub pruning: FeaturePruning,
}

impl MetaModel {
    pub fn weights(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.weight).collect()
    }

    /// Scaled feature matrix for `table`, restricted to the retained columns.
    pub fn prepare(&self, table: &FeatureTable) -> Result<DMatrix<f64>> {
        let selected = table.select_named(&self.features)?;
        Ok(apply_scaler(&selected, &self.scaler)?.values().clone())
    }

    /// Each retained slot's predictions, in slot order.
    pub fn slot_predictions(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        let x = self.prepare(table)?;
        self.slots.par_iter().map(|s| s.model.predict(&x)).collect()
    }
}

/// Weights proportional to `1 / max(MSE, floor)` (lower-is-better metrics) or
/// to the score itself (AUC), normalised to sum to 1.
pub fn slot_weights(scores: &[MetricValue]) -> Vec<f64> {
    let raw: Vec<f64> = scores
        .iter()
        .map(|s| {
            if s.kind.higher_is_better() {
                s.value.max(MSE_FLOOR)
            } else {
                1.0 / s.value.max(MSE_FLOOR)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Names whose importance is strictly greater than `ratio` times the largest
/// importance, in their original order.
pub fn prune_features(importance: &ImportanceVector, ratio: f64) -> (Vec<String>, f64) {
    let max = importance.values.iter().copied().fold(0.0_f64, f64::max);
    let threshold = ratio * max;
    let kept = importance
        .feature_names
        .iter()
        .zip(&importance.values)
        .filter(|(_, v)| **v > threshold)
        .map(|(n, _)| n.clone())
        .collect();
    (kept, threshold)
}

struct Prepared {
    /// Scaled, filtered feature matrix over all table rows.
    x: DMatrix<f64>,
    names: Vec<String>,
    y: Vec<f64>,
    pooled: Vec<usize>,
    test: Vec<usize>,
    scaler: ScalerParams,
    report: ColumnFilterReport,
}

fn prepare(config: &MetaModelConfig, table: &FeatureTable, target: &TargetColumn, test_idx: Option<&[usize]>) -> Result<Prepared> {
    if target.len() != table.n_rows() {
        return Err(Error::LengthMismatch {
            expected: table.n_rows(),
            actual: target.len(),
        });
    }
    if target.task != config.task {
        return Err(Error::invalid(format!(
            "target `{}` is {} but the configuration is {}",
            target.name, target.task, config.task
        )));
    }
    let mut test: Vec<usize> = test_idx.map(|t| t.to_vec()).unwrap_or_default();
    test.sort_unstable();
    test.dedup();
    if let Some(&bad) = test.iter().find(|&&i| i >= table.n_rows()) {
        return Err(Error::Split(format!("test index {bad} out of range for {} rows", table.n_rows())));
    }
    let test_set: BTreeSet<usize> = test.iter().copied().collect();
    let pooled: Vec<usize> = target
        .present_indices()
        .into_iter()
        .filter(|i| !test_set.contains(i))
        .collect();
    if pooled.len() < MIN_ROWS {
        return Err(Error::TooFewRows {
            needed: MIN_ROWS,
            got: pooled.len(),
        });
    }
    let y: Vec<f64> = target.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    if config.task == Task::Classification {
        let ones = pooled.iter().filter(|&&i| y[i] == 1.0).count();
        if ones == 0 || ones == pooled.len() {
            return Err(Error::SingleClass(target.name.clone()));
        }
    }
    let (filtered, report) = filter_columns(table, &pooled)?;
    let scaler = fit_scaler(&filtered, &pooled)?;
    let scaled = apply_scaler(&filtered, &scaler)?;
    Ok(Prepared {
        x: scaled.values().clone(),
        names: scaled.column_names().to_vec(),
        y,
        pooled,
        test,
        scaler,
        report,
    })
}

struct Fitted {
    model: TrainedLearner,
    score: MetricValue,
}

fn fit_and_score(
    spec: &LearnerSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
    split: &DataSplit,
    metric: MetricKind,
) -> Result<Fitted> {
    let xt = x.select_rows(&split.train);
    let yt: Vec<f64> = split.train.iter().map(|&i| y[i]).collect();
    let model = spec.fit(&xt, &yt, names)?;
    let xv = x.select_rows(&split.val);
    let yv: Vec<f64> = split.val.iter().map(|&i| y[i]).collect();
    let score = metric.evaluate(&model.predict(&xv)?, &yv)?;
    if !score.value.is_finite() {
        return Err(Error::NonFinite(format!("{} validation score", spec.kind_name())));
    }
    Ok(Fitted { model, score })
}

fn slot_importance(
    model: &TrainedLearner,
    x: &DMatrix<f64>,
    y: &[f64],
    val: &[usize],
    metric: MetricKind,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    let raw = match model.builtin_importance() {
        Some(v) => ImportanceVector::new(model.feature_names().to_vec(), v)?,
        None => {
            let xv = x.select_rows(val);
            let yv: Vec<f64> = val.iter().map(|&i| y[i]).collect();
            permutation_importance_unchecked(model, &xv, &yv, metric, repeats, seed)?
        }
    };
    normalize_importance(&raw)
}

/// Sort key position: better score first, then catalogue order, then lower
/// split seed.
fn rank_order(metric: MetricKind, entries: &mut [(usize, f64, usize, u64)]) {
    entries.sort_by(|a, b| {
        let by_score = if metric.higher_is_better() {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        by_score.then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
    });
}

pub fn fit_metamodel(
    config: &MetaModelConfig,
    table: &FeatureTable,
    target: &TargetColumn,
    test_idx: Option<&[usize]>,
) -> Result<MetaModel> {
    config.validate()?;
    let prep = prepare(config, table, target, test_idx)?;
    let metric = match config.task {
        Task::Regression => MetricKind::Mse,
        Task::Classification => {
            let labels: Vec<f64> = prep.pooled.iter().map(|&i| prep.y[i]).collect();
            select_weight_metric(&labels, config.minority_threshold)?
        }
    };
    let val_fraction = config.val_fraction();

    // (4) per-slot splits of the pooled region
    let pooled_labels: Option<Vec<f64>> =
        (config.task == Task::Classification).then(|| prep.pooled.iter().map(|&i| prep.y[i]).collect());
    let mut splits = Vec::with_capacity(config.roster.len());
    let mut seeds = Vec::with_capacity(config.roster.len());
    for (i, spec) in config.roster.iter().enumerate() {
        let split_seed = derive_seed(config.seed, 2 * i as u64);
        let learner_seed = derive_seed(derive_seed(config.seed, spec.seed()), 2 * i as u64 + 1);
        let (train, val) = make_train_val_split(&prep.pooled, val_fraction, split_seed, pooled_labels.as_deref())?;
        splits.push(DataSplit {
            train,
            val,
            test: prep.test.clone(),
        });
        seeds.push((split_seed, learner_seed));
    }
    let specs: Vec<LearnerSpec> = config
        .roster
        .iter()
        .zip(&seeds)
        .map(|(s, (_, ls))| s.with_seed(*ls))
        .collect();

    // (5)-(6) fit and score every roster entry
    let first: Vec<Result<Fitted>> = specs
        .par_iter()
        .zip(splits.par_iter())
        .map(|(spec, split)| fit_and_score(spec, &prep.x, &prep.y, &prep.names, split, metric))
        .collect();

    // (7) keep the best
    let mut ranked: Vec<(usize, f64, usize, u64)> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::with_capacity(specs.len());
    for (i, res) in first.iter().enumerate() {
        let (status, score) = match res {
            Ok(f) => {
                ranked.push((i, f.score.value, specs[i].catalogue_index(), seeds[i].0));
                (CandidateStatus::Discarded, Some(f.score.value))
            }
            Err(e) => {
                log::warn!("sub-model {} ({}) failed to fit: {e}", i, specs[i].kind_name());
                (CandidateStatus::Failed(e.to_string()), None)
            }
        };
        candidates.push(Candidate {
            kind: specs[i].kind_name().to_string(),
            roster_index: i,
            split_seed: seeds[i].0,
            score,
            status,
        });
    }
    let wanted = config.keep_models.min(specs.len());
    rank_order(metric, &mut ranked);
    let per_kind_cap = config
        .max_class_fraction
        .map(|f| ((f * wanted as f64).floor() as usize).max(1))
        .unwrap_or(usize::MAX);
    let mut per_kind: BTreeMap<&str, usize> = BTreeMap::new();
    let mut keep: Vec<usize> = Vec::with_capacity(wanted);
    for &(i, ..) in &ranked {
        if keep.len() == wanted {
            break;
        }
        let count = per_kind.entry(specs[i].kind_name()).or_default();
        if *count < per_kind_cap {
            *count += 1;
            keep.push(i);
        }
    }
    if keep.len() < wanted {
        let detail = format!("only {} of {} requested sub-models are usable", keep.len(), wanted);
        return Err(first.into_iter().find_map(|r| r.err()).unwrap_or(Error::invalid(detail)));
    }
    keep.sort_unstable();
    for &i in &keep {
        candidates[i].status = CandidateStatus::Retained;
    }
    let mut fitted: Vec<Option<Fitted>> = first.into_iter().map(|r| r.ok()).collect();
    let retained: Vec<(usize, Fitted)> = keep
        .iter()
        .map(|&i| (i, fitted[i].take().expect("retained slot was fitted")))
        .collect();

    // (8) importance-based feature pruning
    let first_scores: Vec<MetricValue> = retained.iter().map(|(_, f)| f.score).collect();
    let first_weights = slot_weights(&first_scores);
    let first_importance: Vec<ImportanceVector> = retained
        .par_iter()
        .map(|(i, f)| {
            slot_importance(
                &f.model,
                &prep.x,
                &prep.y,
                &splits[*i].val,
                metric,
                config.importance_repeats,
                derive_seed(seeds[*i].1, 0x1),
            )
        })
        .collect::<Result<_>>()?;
    let aggregated = aggregate_importance(&first_importance, &first_weights)?;
    let (features, threshold) = prune_features(&aggregated, config.feature_keep_ratio);
    let dropped: Vec<String> = prep.names.iter().filter(|n| !features.contains(n)).cloned().collect();
    let cols: Vec<usize> = features
        .iter()
        .map(|f| prep.names.iter().position(|n| n == f).expect("pruned name exists"))
        .collect();
    let x_pruned = prep.x.select_columns(&cols);

    // (9)-(10) retrain on the pruned features, rescore and weight
    let second: Vec<(Fitted, ImportanceVector)> = retained
        .par_iter()
        .map(|(i, _)| -> Result<(Fitted, ImportanceVector)> {
            let f = fit_and_score(&specs[*i], &x_pruned, &prep.y, &features, &splits[*i], metric)?;
            let imp = slot_importance(
                &f.model,
                &x_pruned,
                &prep.y,
                &splits[*i].val,
                metric,
                config.importance_repeats,
                derive_seed(seeds[*i].1, 0x2),
            )?;
            Ok((f, imp))
        })
        .collect::<Result<_>>()?;
    let scores: Vec<MetricValue> = second.iter().map(|(f, _)| f.score).collect();
    let weights = slot_weights(&scores);
    let slots: Vec<SubModelSlot> = retained
        .iter()
        .zip(second)
        .zip(&weights)
        .map(|(((i, _), (f, importance)), w)| SubModelSlot {
            spec: specs[*i].clone(),
            roster_index: *i,
            split_seed: seeds[*i].0,
            learner_seed: seeds[*i].1,
            split: splits[*i].clone(),
            score: f.score,
            weight: *w,
            model: f.model,
            importance,
        })
        .collect();

    Ok(MetaModel {
        config: config.clone(),
        task: config.task,
        target_name: target.name.clone(),
        metric,
        slots,
        scaler: prep.scaler.subset(&features)?,
        features,
        filter_report: prep.report,
        candidates,
        pruning: FeaturePruning {
            importance: aggregated,
            threshold,
            dropped,
        },
    })
}

/// Weighted mean of the slot predictions (probabilities for
/// classification), accumulated in slot order.
pub fn metamodel_predict(model: &MetaModel, table: &FeatureTable) -> Result<Vec<f64>> {
    let per_slot = model.slot_predictions(table)?;
    Ok(combine(model.task, &per_slot, &model.weights()))
}

pub(crate) fn combine(task: Task, per_slot: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = per_slot.first().map_or(0, |p| p.len());
    let mut out = vec![0.0; n];
    for (pred, w) in per_slot.iter().zip(weights) {
        for (o, p) in out.iter_mut().zip(pred) {
            *o += w * p;
        }
    }
    if task == Task::Classification {
        for o in &mut out {
            *o = o.clamp(0.0, 1.0);
        }
    }
    out
}

/// Weighted mean of the retained slots' normalised importances.
pub fn metamodel_importance(model: &MetaModel) -> Result<ImportanceVector> {
    let vectors: Vec<ImportanceVector> = model.slots.iter().map(|s| s.importance.clone()).collect();
    aggregate_importance(&vectors, &model.weights())
}
