use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::info;
use metamodel_core::importance::ImportanceVector;
use metamodel_core::metamodel::{Candidate, MetaModel};
use metamodel_core::metrics::{aggregate_multi_target, effective_sample_size};
use metamodel_core::persist::{load_metamodel, save_metamodel};
use metamodel_core::significance::{bootstrap_compare, BootstrapResult};
use metamodel_core::tabular::{
    load_dataset, load_named_columns, load_split_file, load_targets, make_random_split, write_split_file,
    ColumnFilterReport, ColumnKind, DataSplit, TargetColumn,
};
use metamodel_core::{fit_metamodel, metamodel_importance, metamodel_predict, Error, MetricKind, Task};
use serde::Serialize;

use crate::config::{parse_fractions, FileConfig};
use crate::report::{num, text_table, write_json, write_text};
use crate::{CliError, CompareArgs, EffectiveNArgs, EvaluateArgs, ImportanceArgs, PredictArgs, Stage, TrainArgs};

/// Prefix of prediction columns in written prediction files.
pub const PRED_PREFIX: &str = "f_pred_";

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .stage("create output directory")
}

fn model_file_name(target: &str) -> String {
    format!("model_{target}.mmdl")
}

fn kind_label(kind: ColumnKind) -> &'static str {
    match kind {
        ColumnKind::ExternalDescriptor => "descriptor",
        ColumnKind::LearnedLatent => "learned",
    }
}

#[derive(Serialize)]
struct SplitSummary {
    source: &'static str,
    train: usize,
    val: usize,
    test: usize,
}

#[derive(Serialize)]
struct SlotReport {
    slot: usize,
    kind: String,
    roster_index: usize,
    split_seed: u64,
    learner_seed: u64,
    validation_metric: MetricKind,
    validation_score: f64,
    weight: f64,
    n_train: usize,
    n_val: usize,
}

#[derive(Serialize)]
struct DroppedColumns {
    nonfinite: Vec<String>,
    constant: Vec<String>,
    pruned: Vec<String>,
}

#[derive(Serialize)]
struct TargetTrainReport {
    target: String,
    model_file: String,
    retained: Vec<SlotReport>,
    candidates: Vec<Candidate>,
    features: Vec<String>,
    prune_threshold: f64,
    dropped_columns: DroppedColumns,
}

#[derive(Serialize)]
struct TrainReport {
    task: Task,
    seed: u64,
    split: SplitSummary,
    load_filter: ColumnFilterReport,
    targets: Vec<TargetTrainReport>,
}

fn slot_reports(model: &MetaModel) -> Vec<SlotReport> {
    model
        .slots
        .iter()
        .enumerate()
        .map(|(k, s)| SlotReport {
            slot: k + 1,
            kind: s.spec.kind_name().to_string(),
            roster_index: s.roster_index,
            split_seed: s.split_seed,
            learner_seed: s.learner_seed,
            validation_metric: s.score.kind,
            validation_score: s.score.value,
            weight: s.weight,
            n_train: s.split.train.len(),
            n_val: s.split.val.len(),
        })
        .collect()
}

fn slot_table(slots: &[SlotReport]) -> String {
    let rows: Vec<Vec<String>> = slots
        .iter()
        .map(|s| {
            vec![
                s.slot.to_string(),
                s.kind.clone(),
                s.split_seed.to_string(),
                num(s.validation_score),
                num(s.weight),
            ]
        })
        .collect();
    text_table(&["slot", "kind", "split_seed", "val_score", "weight"], &rows)
}

fn train_report_text(r: &TrainReport) -> String {
    let mut out = format!(
        "task {}  seed {}  split {} (train {}, val {}, test {})\n",
        r.task, r.seed, r.split.source, r.split.train, r.split.val, r.split.test
    );
    for t in &r.targets {
        out.push_str(&format!(
            "\ntarget {}  ({} slots, metric {})\n",
            t.target,
            t.retained.len(),
            t.retained.first().map(|s| s.validation_metric.name()).unwrap_or("-")
        ));
        out.push_str(&slot_table(&t.retained));
        out.push_str(&format!(
            "features kept {}, pruned {}, dropped non-finite {}, dropped constant {}\n",
            t.features.len(),
            t.dropped_columns.pruned.len(),
            t.dropped_columns.nonfinite.len(),
            t.dropped_columns.constant.len()
        ));
    }
    out
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let task = a.task.or(file.task).unwrap_or(Task::Regression);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let split_file = a.split_file.clone().or_else(|| file.split_file.clone());
    let split_frac = match &a.split_frac {
        Some(s) => Some(parse_fractions(s)?),
        None => file.split_frac,
    };
    if split_file.is_some() && split_frac.is_some() {
        return Err(CliError::usage(
            "both a split file and split fractions were given; use exactly one split source",
        ));
    }
    let mut base = file.metamodel_config(task, seed)?;
    if let Some(f) = split_frac {
        base.split_fractions = f;
    }
    base.validate()
        .map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;

    info!("loading {}", a.data.display());
    let (table, targets, load_filter) = load_dataset(&a.data, &a.target, task).stage("load data")?;
    let (split, source) = match &split_file {
        Some(path) => (load_split_file(path, table.row_ids()).stage("read split file")?, "file"),
        None => (
            make_random_split(table.n_rows(), base.split_fractions, seed).stage("split rows")?,
            "random",
        ),
    };
    if split_file.is_some() {
        let n = split.len() as f64;
        base.split_fractions = [
            split.train.len() as f64 / n,
            split.val.len() as f64 / n,
            split.test.len() as f64 / n,
        ];
        base.validate()
            .map_err(|e| CliError::usage(format!("split file proportions: {e}")))?;
    }
    create_dir(&a.out)?;

    let mut reports = Vec::new();
    for target in &targets {
        info!("training target {}", target.name);
        let model = fit_metamodel(&base, &table, target, Some(&split.test)).stage(format!("train {}", target.name))?;
        let name = model_file_name(&target.name);
        save_metamodel(&model, &a.out.join(&name)).stage("write model")?;
        reports.push(TargetTrainReport {
            target: target.name.clone(),
            model_file: name,
            retained: slot_reports(&model),
            candidates: model.candidates.clone(),
            features: model.features.clone(),
            prune_threshold: model.pruning.threshold,
            dropped_columns: DroppedColumns {
                nonfinite: model.filter_report.dropped_nonfinite.clone(),
                constant: model.filter_report.dropped_constant.clone(),
                pruned: model.pruning.dropped.clone(),
            },
        });
    }
    write_split_file(&a.out.join("split.csv"), &split, table.row_ids()).stage("write split")?;
    let report = TrainReport {
        task,
        seed,
        split: SplitSummary {
            source,
            train: split.train.len(),
            val: split.val.len(),
            test: split.test.len(),
        },
        load_filter,
        targets: reports,
    };
    write_json(&a.out.join("train_report.json"), &report)?;
    let text = train_report_text(&report);
    write_text(&a.out.join("train_report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<MetaModel>, CliError> {
    let models = paths
        .iter()
        .map(|p| load_metamodel(p).stage(format!("load model {}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut names = BTreeSet::new();
    for m in &models {
        if !names.insert(m.target_name.as_str()) {
            return Err(CliError::usage(format!("two models predict target `{}`", m.target_name)));
        }
    }
    Ok(models)
}

/// Union of the models' retained features, in first-seen order.
fn needed_features(models: &[MetaModel]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    models
        .iter()
        .flat_map(|m| m.features.iter())
        .filter(|f| seen.insert(f.as_str()))
        .cloned()
        .collect()
}

enum Cell<'a> {
    Truth(&'a TargetColumn),
    Pred(&'a [f64]),
}

fn write_predictions(path: &Path, ids: &[String], columns: &[(String, Cell)]) -> Result<(), CliError> {
    let to_err = |e: csv::Error| {
        Error::Parse {
            line: 0,
            message: format!("writing {}: {e}", path.display()),
        }
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err).stage("write predictions")?;
    let mut header = vec!["id".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(to_err).stage("write predictions")?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        for (_, cell) in columns {
            record.push(match cell {
                Cell::Truth(t) => t.values[i].map(|v| format!("{v}")).unwrap_or_default(),
                Cell::Pred(p) => format!("{}", p[i]),
            });
        }
        w.write_record(&record).map_err(to_err).stage("write predictions")?;
    }
    w.flush()
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .stage("write predictions")
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let models = load_models(&a.model)?;
    let features = needed_features(&models);
    let (table, _) = load_named_columns(&a.data, &features, &[], Task::Regression).stage("load data")?;
    let preds = models
        .iter()
        .map(|m| metamodel_predict(m, &table).stage(format!("predict {}", m.target_name)))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(&a.out)?;
    let columns: Vec<(String, Cell)> = models
        .iter()
        .zip(&preds)
        .map(|(m, p)| (format!("{PRED_PREFIX}{}", m.target_name), Cell::Pred(p)))
        .collect();
    write_predictions(&a.out.join("predictions.csv"), table.row_ids(), &columns)?;
    println!("wrote {} rows to {}", table.n_rows(), a.out.join("predictions.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct FeatureRow {
    rank: usize,
    feature: String,
    kind: &'static str,
    importance: f64,
}

fn importance_rows(imp: &ImportanceVector) -> Vec<FeatureRow> {
    let mut order: Vec<usize> = (0..imp.values.len()).collect();
    order.sort_by(|&i, &j| imp.values[j].total_cmp(&imp.values[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .enumerate()
        .map(|(rank, j)| FeatureRow {
            rank: rank + 1,
            feature: imp.feature_names[j].clone(),
            kind: kind_label(ColumnKind::from_name(&imp.feature_names[j])),
            importance: imp.values[j],
        })
        .collect()
}

fn importance_table(rows: &[FeatureRow]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.rank.to_string(), r.feature.clone(), r.kind.to_string(), num(r.importance)])
        .collect();
    text_table(&["rank", "feature", "kind", "importance"], &rows)
}

#[derive(Serialize)]
struct MetricEntry {
    metric: MetricKind,
    value: f64,
}

#[derive(Serialize)]
struct TargetEvaluation {
    target: String,
    n: usize,
    metrics: Vec<MetricEntry>,
    roster: Vec<SlotReport>,
    importance: Vec<FeatureRow>,
    /// Ensemble (a) against its highest-weighted slot (b).
    bootstrap: Option<BootstrapResult>,
}

#[derive(Serialize)]
struct EvaluationReport {
    task: Task,
    rows: usize,
    aggregation: &'static str,
    aggregated: Vec<MetricEntry>,
    targets: Vec<TargetEvaluation>,
}

fn report_metrics(task: Task) -> [MetricKind; 2] {
    match task {
        Task::Regression => [MetricKind::Mae, MetricKind::Rmse],
        Task::Classification => [MetricKind::RocAuc, MetricKind::PrcAuc],
    }
}

fn evaluation_text(r: &EvaluationReport) -> String {
    let kinds: Vec<MetricKind> = r.aggregated.iter().map(|m| m.metric).collect();
    let mut headers = vec!["target", "n"];
    headers.extend(kinds.iter().map(|k| k.name()));
    let mut rows: Vec<Vec<String>> = r
        .targets
        .iter()
        .map(|t| {
            let mut row = vec![t.target.clone(), t.n.to_string()];
            row.extend(t.metrics.iter().map(|m| num(m.value)));
            row
        })
        .collect();
    let mut agg = vec![r.aggregation.to_string(), r.rows.to_string()];
    agg.extend(r.aggregated.iter().map(|m| num(m.value)));
    rows.push(agg);
    let mut out = format!("task {}  rows {}\n", r.task, r.rows);
    out.push_str(&text_table(&headers, &rows));
    for t in &r.targets {
        out.push_str(&format!("\ntarget {} roster\n", t.target));
        out.push_str(&slot_table(&t.roster));
        if let Some(b) = &t.bootstrap {
            out.push_str(&format!(
                "ensemble {} {}  best slot {}  p(best slot better) {}  n_boot {}\n",
                b.metric,
                num(b.metric_a),
                num(b.metric_b),
                num(b.p_value),
                b.n_boot
            ));
        }
        out.push_str(&format!("\ntarget {} importance\n", t.target));
        out.push_str(&importance_table(&t.importance));
    }
    out
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let models = load_models(&a.model)?;
    let task = models[0].task;
    if models.iter().any(|m| m.task != task) {
        return Err(CliError::usage("models mix regression and classification"));
    }
    if let Some(m) = a.metric {
        if m.task() != task {
            return Err(CliError::usage(format!("metric {m} does not apply to {task} models")));
        }
    }
    let features = needed_features(&models);
    let target_names: Vec<String> = models.iter().map(|m| m.target_name.clone()).collect();
    let (table, targets) = load_named_columns(&a.data, &features, &target_names, task).stage("load data")?;
    let (table, targets) = match &a.split_file {
        Some(path) => {
            let split: DataSplit = load_split_file(path, table.row_ids()).stage("read split file")?;
            if split.test.is_empty() {
                return Err(CliError::usage("split file has no test rows"));
            }
            let sub = table.select_rows(&split.test);
            let targets = targets
                .iter()
                .map(|t| {
                    let values = split.test.iter().map(|&i| t.values[i]).collect();
                    TargetColumn::new(t.name.clone(), task, values).stage("select test rows")
                })
                .collect::<Result<Vec<_>, _>>()?;
            (sub, targets)
        }
        None => (table, targets),
    };

    let mut evaluations = Vec::new();
    let mut preds = Vec::new();
    for (model, target) in models.iter().zip(&targets) {
        let stage = format!("evaluate {}", target.name);
        let pred = metamodel_predict(model, &table).stage(&stage)?;
        let present = target.present_indices();
        let truth = target.dense(&present);
        let p: Vec<f64> = present.iter().map(|&i| pred[i]).collect();
        let metrics = report_metrics(task)
            .into_iter()
            .map(|k| {
                Ok(MetricEntry {
                    metric: k,
                    value: k.evaluate(&p, &truth)?.value,
                })
            })
            .collect::<metamodel_core::Result<Vec<_>>>()
            .stage(&stage)?;
        let bootstrap = match a.n_boot {
            Some(n_boot) => {
                let metric = a.metric.unwrap_or(match task {
                    Task::Regression => MetricKind::Rmse,
                    Task::Classification => MetricKind::RocAuc,
                });
                let slots = model.slot_predictions(&table).stage(&stage)?;
                let best = (0..model.slots.len())
                    .max_by(|&i, &j| model.slots[i].weight.total_cmp(&model.slots[j].weight).then(j.cmp(&i)))
                    .expect("model has slots");
                let b: Vec<f64> = present.iter().map(|&i| slots[best][i]).collect();
                Some(bootstrap_compare(&p, &b, &truth, metric, n_boot, a.seed).stage(&stage)?)
            }
            None => None,
        };
        evaluations.push(TargetEvaluation {
            target: target.name.clone(),
            n: present.len(),
            metrics,
            roster: slot_reports(model),
            importance: importance_rows(&metamodel_importance(model).stage(&stage)?),
            bootstrap,
        });
        preds.push(pred);
    }

    let aggregated = report_metrics(task)
        .into_iter()
        .enumerate()
        .map(|(k, kind)| {
            let values: Vec<f64> = evaluations.iter().map(|e| e.metrics[k].value).collect();
            Ok(MetricEntry {
                metric: kind,
                value: aggregate_multi_target(&values, task)?,
            })
        })
        .collect::<metamodel_core::Result<Vec<_>>>()
        .stage("aggregate targets")?;
    let report = EvaluationReport {
        task,
        rows: table.n_rows(),
        aggregation: match task {
            Task::Regression => "geometric-mean",
            Task::Classification => "arithmetic-mean",
        },
        aggregated,
        targets: evaluations,
    };

    create_dir(&a.out)?;
    let mut columns = Vec::new();
    for (target, pred) in targets.iter().zip(&preds) {
        columns.push((target.name.clone(), Cell::Truth(target)));
        columns.push((format!("{PRED_PREFIX}{}", target.name), Cell::Pred(pred)));
    }
    write_predictions(&a.out.join("predictions.csv"), table.row_ids(), &columns)?;
    write_json(&a.out.join("evaluation.json"), &report)?;
    let text = evaluation_text(&report);
    write_text(&a.out.join("evaluation.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<(), CliError> {
    let pred_col = format!("{PRED_PREFIX}{}", a.target);
    let (ids_a, cols_a) = load_targets(&a.preds_a, &[a.target.clone(), pred_col.clone()], Task::Regression)
        .stage("read prediction file A")?;
    let (ids_b, cols_b) =
        load_targets(&a.preds_b, std::slice::from_ref(&pred_col), Task::Regression).stage("read prediction file B")?;

    let index_b: std::collections::HashMap<&str, usize> =
        ids_b.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if ids_a.len() != ids_b.len() || ids_a.iter().any(|id| !index_b.contains_key(id.as_str())) {
        return Err(Error::ColumnMismatch(format!(
            "row ids of {} and {} do not match",
            a.preds_a.display(),
            a.preds_b.display()
        )))
        .stage("align prediction files");
    }
    // resampling runs over rows sorted by id, so file row order is irrelevant
    let mut order: Vec<usize> = (0..ids_a.len()).collect();
    order.sort_by(|&i, &j| ids_a[i].cmp(&ids_a[j]));
    let (mut truth, mut pa, mut pb) = (Vec::new(), Vec::new(), Vec::new());
    for i in order {
        let Some(t) = cols_a[0].values[i] else { continue };
        let j = index_b[ids_a[i].as_str()];
        match (cols_a[1].values[i], cols_b[0].values[j]) {
            (Some(x), Some(y)) => {
                truth.push(t);
                pa.push(x);
                pb.push(y);
            }
            _ => {
                return Err(Error::NonFinite(format!("missing prediction for row `{}`", ids_a[i])))
                    .stage("align prediction files")
            }
        }
    }
    let result = bootstrap_compare(&pa, &pb, &truth, a.metric, a.n_boot, a.seed).stage("bootstrap")?;
    println!(
        "{} a {}  b {}  p(b better) {}  n {}  n_boot {}",
        result.metric,
        num(result.metric_a),
        num(result.metric_b),
        num(result.p_value),
        truth.len(),
        result.n_boot
    );
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("comparison.json"), &result)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SlotImportance {
    kind: String,
    split_seed: u64,
    weight: f64,
    features: Vec<FeatureRow>,
}

#[derive(Serialize)]
struct TargetImportance {
    target: String,
    features: Vec<FeatureRow>,
    slots: Vec<SlotImportance>,
}

pub fn importance(a: &ImportanceArgs) -> Result<(), CliError> {
    let models = load_models(&a.model)?;
    let mut text = String::new();
    let mut report = Vec::new();
    for m in &models {
        let agg = metamodel_importance(m).stage(format!("importance {}", m.target_name))?;
        let features = importance_rows(&agg);
        text.push_str(&format!("target {}\n", m.target_name));
        text.push_str(&importance_table(&features));
        report.push(TargetImportance {
            target: m.target_name.clone(),
            features,
            slots: m
                .slots
                .iter()
                .map(|s| SlotImportance {
                    kind: s.spec.kind_name().to_string(),
                    split_seed: s.split_seed,
                    weight: s.weight,
                    features: importance_rows(&s.importance),
                })
                .collect(),
        });
    }
    print!("{text}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("importance.json"), &report)?;
        write_text(&out.join("importance.txt"), &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EffectiveN {
    target: String,
    present: usize,
    effective_n: f64,
}

pub fn effective_n(a: &EffectiveNArgs) -> Result<(), CliError> {
    let (_, targets) = load_targets(&a.data, &a.target, Task::Regression).stage("load targets")?;
    let columns: Vec<Vec<Option<f64>>> = targets.iter().map(|t| t.values.clone()).collect();
    let eff = effective_sample_size(&columns).stage("effective sample size")?;
    let rows: Vec<EffectiveN> = targets
        .iter()
        .zip(&eff)
        .map(|(t, &e)| EffectiveN {
            target: t.name.clone(),
            present: t.present_indices().len(),
            effective_n: e,
        })
        .collect();
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.target.clone(), r.present.to_string(), format!("{:.2}", r.effective_n)])
        .collect();
    let text = text_table(&["target", "present", "effective_n"], &table_rows);
    print!("{text}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join("effective_n.json"), &rows)?;
        write_text(&out.join("effective_n.txt"), &text)?;
    }
    Ok(())
}
