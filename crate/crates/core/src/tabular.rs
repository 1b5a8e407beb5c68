//! Tabular feature/target data: loading, column hygiene, scaling and
//! splitting.
//!
//! The on-disk format is a UTF-8 CSV with a header row. The first column is
//! `id`; feature columns carry an `f_` prefix (learned latent features use
//! `f_mpnn_`); every other named column is a candidate target. Feature
//! columns holding any NaN/Inf/empty cell are dropped at load time, as are
//! columns that are constant over every row.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const FEATURE_PREFIX: &str = "f_";
pub const LEARNED_PREFIX: &str = "f_mpnn_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regression" | "reg" => Ok(Task::Regression),
            "classification" | "binary-classification" | "class" | "clf" => {
                Ok(Task::Classification)
            }
            other => Err(Error::invalid(format!("unknown task kind `{other}`"))),
        }
    }
}

/// Where a feature column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    ExternalDescriptor,
    LearnedLatent,
}

impl ColumnKind {
    pub fn from_name(name: &str) -> Self {
        if name.starts_with(LEARNED_PREFIX) {
            ColumnKind::LearnedLatent
        } else {
            ColumnKind::ExternalDescriptor
        }
    }
}

/// Dense feature matrix with named columns and row identifiers.
///
/// Every cell is finite; construction rejects NaN/Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    row_ids: Vec<String>,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
    values: DMatrix<f64>,
}

impl FeatureTable {
    pub fn new(
        row_ids: Vec<String>,
        column_names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        let kinds = column_names.iter().map(|n| ColumnKind::from_name(n)).collect();
        Self::with_kinds(row_ids, column_names, kinds, values)
    }

    pub fn with_kinds(
        row_ids: Vec<String>,
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != row_ids.len() {
            return Err(Error::LengthMismatch {
                expected: row_ids.len(),
                actual: values.nrows(),
            });
        }
        if values.ncols() != column_names.len() || column_kinds.len() != column_names.len() {
            return Err(Error::ColumnMismatch(format!(
                "{} names, {} kinds, {} value columns",
                column_names.len(),
                column_kinds.len(),
                values.ncols()
            )));
        }
        ensure_unique(&column_names, "column name")?;
        ensure_unique(&row_ids, "row id")?;
        if let Some(j) = (0..values.ncols()).find(|&j| values.column(j).iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!("feature column `{}`", column_names[j])));
        }
        Ok(Self {
            row_ids,
            column_names,
            column_kinds,
            values,
        })
    }

    /// Builds a table with generated ids `0..n`.
    pub fn from_matrix(column_names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(ids, column_names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            column_names: self.column_names.clone(),
            column_kinds: self.column_kinds.clone(),
            values: self.values.select_rows(rows),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureTable {
        FeatureTable {
            row_ids: self.row_ids.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            column_kinds: cols.iter().map(|&j| self.column_kinds[j]).collect(),
            values: self.values.select_columns(cols),
        }
    }

    /// Projects onto the named columns, in the given order.
    pub fn select_named(&self, names: &[String]) -> Result<FeatureTable> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::ColumnMismatch(format!("missing feature column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }
}

fn ensure_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} `{item}`")));
        }
    }
    Ok(())
}

/// One target variable. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetColumn {
    pub name: String,
    pub task: Task,
    pub values: Vec<Option<f64>>,
}

impl TargetColumn {
    pub fn new(name: impl Into<String>, task: Task, values: Vec<Option<f64>>) -> Result<Self> {
        let name = name.into();
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        if present.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("target `{name}`")));
        }
        if present.len() < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                got: present.len(),
            });
        }
        if task == Task::Classification {
            if let Some(v) = present.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(format!(
                    "classification target `{name}` has value {v}; expected 0 or 1"
                )));
            }
            if present.iter().all(|&v| v == present[0]) {
                return Err(Error::SingleClass(format!("target `{name}`")));
            }
        }
        Ok(Self { name, task, values })
    }

    pub fn from_dense(name: impl Into<String>, task: Task, values: &[f64]) -> Result<Self> {
        Self::new(name, task, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn present_indices(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].is_some()).collect()
    }

    /// Values at `rows`; panics if any of them is missing.
    pub fn dense(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter()
            .map(|&i| self.values[i].expect("row with missing target"))
            .collect()
    }
}

/// Disjoint train/validation/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-column affine standardisation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    /// Restricts the parameters to `names`, in that order.
    pub fn subset(&self, names: &[String]) -> Result<ScalerParams> {
        let mut out = ScalerParams {
            columns: Vec::with_capacity(names.len()),
            mean: Vec::with_capacity(names.len()),
            std: Vec::with_capacity(names.len()),
        };
        for name in names {
            let j = self
                .columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::ColumnMismatch(format!("scaler has no column `{name}`")))?;
            out.columns.push(name.clone());
            out.mean.push(self.mean[j]);
            out.std.push(self.std[j]);
        }
        Ok(out)
    }

    /// Maps standardised values back to the original scale.
    pub fn invert(&self, table: &FeatureTable) -> Result<FeatureTable> {
        self.check_columns(table)?;
        let mut values = table.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(FeatureTable {
            values,
            ..table.clone()
        })
    }

    fn check_columns(&self, table: &FeatureTable) -> Result<()> {
        if self.columns != table.column_names {
            return Err(Error::ColumnMismatch(format!(
                "scaler fitted on {} columns, table has {} (or names differ)",
                self.columns.len(),
                table.n_cols()
            )));
        }
        Ok(())
    }
}

/// Outcome of column hygiene: which columns were dropped and why.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnFilterReport {
    pub dropped_nonfinite: Vec<String>,
    pub dropped_constant: Vec<String>,
    pub retained: Vec<String>,
}

fn parse_feature_cell(raw: &str, line: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{s}` in feature column `{column}`"),
    })
}

fn parse_target_cell(raw: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v = s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{s}` in target column `{column}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite target `{s}` in column `{column}`"),
        });
    }
    Ok(Some(v))
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

struct RawCsv {
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_raw(path: &Path) -> Result<RawCsv> {
    let mut reader = open_csv(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be `id`".into(),
        });
    }
    ensure_unique(&header, "header column")?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, record));
    }
    Ok(RawCsv { header, rows })
}

/// Reads only the named target columns (and ids) from a dataset CSV.
pub fn load_targets(path: &Path, target_names: &[String], task: Task) -> Result<(Vec<String>, Vec<TargetColumn>)> {
    let raw = read_raw(path)?;
    let target_cols = target_names
        .iter()
        .map(|t| {
            raw.header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::UnknownColumn(t.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = raw.rows.iter().map(|(_, r)| r[0].trim().to_string()).collect();
    ensure_unique(&ids, "row id")?;
    let targets = target_names
        .iter()
        .zip(&target_cols)
        .map(|(name, &c)| {
            let values = raw
                .rows
                .iter()
                .map(|(line, r)| parse_target_cell(&r[c], *line, name))
                .collect::<Result<Vec<_>>>()?;
            TargetColumn::new(name.clone(), task, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, targets))
}

/// Loads a dataset CSV, dropping feature columns with any NaN/Inf/empty cell
/// and feature columns constant over all rows.
pub fn load_dataset(
    path: &Path,
    target_names: &[String],
    task: Task,
) -> Result<(FeatureTable, Vec<TargetColumn>, ColumnFilterReport)> {
    let raw = read_raw(path)?;
    let target_cols = target_names
        .iter()
        .map(|t| {
            raw.header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::UnknownColumn(t.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let feature_cols: Vec<usize> = (1..raw.header.len())
        .filter(|&c| raw.header[c].starts_with(FEATURE_PREFIX) && !target_cols.contains(&c))
        .collect();

    let n = raw.rows.len();
    let mut ids = Vec::with_capacity(n);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); feature_cols.len()];
    for (line, record) in &raw.rows {
        ids.push(record[0].trim().to_string());
        for (k, &c) in feature_cols.iter().enumerate() {
            columns[k].push(parse_feature_cell(&record[c], *line, &raw.header[c])?);
        }
    }
    ensure_unique(&ids, "row id")?;

    let targets = target_names
        .iter()
        .zip(&target_cols)
        .map(|(name, &c)| {
            let values = raw
                .rows
                .iter()
                .map(|(line, r)| parse_target_cell(&r[c], *line, name))
                .collect::<Result<Vec<_>>>()?;
            TargetColumn::new(name.clone(), task, values)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ColumnFilterReport::default();
    let mut kept_names = Vec::new();
    let mut kept_values = Vec::new();
    for (k, &c) in feature_cols.iter().enumerate() {
        let name = &raw.header[c];
        let col = &columns[k];
        if col.iter().any(|v| !v.is_finite()) {
            report.dropped_nonfinite.push(name.clone());
        } else if col.iter().all(|&v| v == col[0]) {
            report.dropped_constant.push(name.clone());
        } else {
            kept_names.push(name.clone());
            kept_values.extend_from_slice(col);
        }
    }
    if kept_names.is_empty() {
        return Err(Error::NoFeatures);
    }
    report.retained = kept_names.clone();
    let values = DMatrix::from_vec(n, kept_names.len(), kept_values);
    let table = FeatureTable::new(ids, kept_names, values)?;
    Ok((table, targets, report))
}

/// Reads exactly the named feature columns, without the column filtering of
/// [`load_dataset`], plus the named target columns. Used at prediction time,
/// where the column set is fixed by a trained model.
pub fn load_named_columns(
    path: &Path,
    feature_names: &[String],
    target_names: &[String],
    task: Task,
) -> Result<(FeatureTable, Vec<TargetColumn>)> {
    let raw = read_raw(path)?;
    let find = |name: &String| raw.header.iter().position(|h| h == name);
    let feature_cols = feature_names
        .iter()
        .map(|n| find(n).ok_or_else(|| Error::ColumnMismatch(format!("missing feature column `{n}`"))))
        .collect::<Result<Vec<_>>>()?;
    let target_cols = target_names
        .iter()
        .map(|t| find(t).ok_or_else(|| Error::UnknownColumn(t.clone())))
        .collect::<Result<Vec<_>>>()?;

    let n = raw.rows.len();
    let mut ids = Vec::with_capacity(n);
    let mut values = DMatrix::zeros(n, feature_cols.len());
    for (i, (line, record)) in raw.rows.iter().enumerate() {
        ids.push(record[0].trim().to_string());
        for (k, &c) in feature_cols.iter().enumerate() {
            let v = parse_feature_cell(&record[c], *line, &raw.header[c])?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("column `{}` at line {line}", raw.header[c])));
            }
            values[(i, k)] = v;
        }
    }
    ensure_unique(&ids, "row id")?;
    let targets = target_names
        .iter()
        .zip(&target_cols)
        .map(|(name, &c)| {
            let values = raw
                .rows
                .iter()
                .map(|(line, r)| parse_target_cell(&r[c], *line, name))
                .collect::<Result<Vec<_>>>()?;
            TargetColumn::new(name.clone(), task, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((FeatureTable::new(ids, feature_names.to_vec(), values)?, targets))
}

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

/// Writes `table` plus optional target columns in the dataset CSV format.
pub fn write_dataset(path: &Path, table: &FeatureTable, targets: &[TargetColumn]) -> Result<()> {
    for t in targets {
        if t.len() != table.n_rows() {
            return Err(Error::LengthMismatch {
                expected: table.n_rows(),
                actual: t.len(),
            });
        }
    }
    let mut out = String::new();
    out.push_str("id");
    for name in &table.column_names {
        out.push(',');
        out.push_str(name);
    }
    for t in targets {
        out.push(',');
        out.push_str(&t.name);
    }
    out.push('\n');
    for i in 0..table.n_rows() {
        out.push_str(&table.row_ids[i]);
        for j in 0..table.n_cols() {
            out.push(',');
            out.push_str(&fmt_float(table.values[(i, j)]));
        }
        for t in targets {
            out.push(',');
            if let Some(v) = t.values[i] {
                out.push_str(&fmt_float(v));
            }
        }
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Per-column mean and population standard deviation over `rows`.
pub fn fit_scaler(table: &FeatureTable, rows: &[usize]) -> Result<ScalerParams> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a scaler on zero rows"));
    }
    let n = rows.len() as f64;
    let mut mean = Vec::with_capacity(table.n_cols());
    let mut std = Vec::with_capacity(table.n_cols());
    for j in 0..table.n_cols() {
        let col = table.values.column(j);
        let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
        let var = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        if !(s > 0.0) {
            return Err(Error::ZeroVariance(table.column_names[j].clone()));
        }
        mean.push(m);
        std.push(s);
    }
    Ok(ScalerParams {
        columns: table.column_names.clone(),
        mean,
        std,
    })
}

/// `(x - mean) / std` column by column. Not idempotent.
pub fn apply_scaler(table: &FeatureTable, params: &ScalerParams) -> Result<FeatureTable> {
    params.check_columns(table)?;
    let mut values = table.values.clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let (m, s) = (params.mean[j], params.std[j]);
        for v in col.iter_mut() {
            *v = (*v - m) / s;
        }
    }
    Ok(FeatureTable {
        values,
        ..table.clone()
    })
}

/// Drops every column that is constant over `rows`. Surviving columns keep
/// their order.
pub fn filter_columns(table: &FeatureTable, rows: &[usize]) -> Result<(FeatureTable, ColumnFilterReport)> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot filter columns on zero rows"));
    }
    let mut keep = Vec::new();
    let mut report = ColumnFilterReport::default();
    for j in 0..table.n_cols() {
        let col = table.values.column(j);
        let first = col[rows[0]];
        if rows.iter().all(|&i| col[i] == first) {
            report.dropped_constant.push(table.column_names[j].clone());
        } else {
            keep.push(j);
            report.retained.push(table.column_names[j].clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::NoFeatures);
    }
    Ok((table.select_columns(&keep), report))
}

fn part_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

/// Seeded random three-way split. Validation and test sizes are
/// `floor(n * fraction)`; the remainder goes to training.
pub fn make_random_split(n_rows: usize, fractions: [f64; 3], seed: u64) -> Result<DataSplit> {
    if fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::Split(format!("fractions must be positive, got {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions sum to {total}, not 1")));
    }
    if n_rows < 10 {
        return Err(Error::TooFewRows { needed: 10, got: n_rows });
    }
    let n_val = part_size(n_rows, fractions[1]);
    let n_test = part_size(n_rows, fractions[2]);
    if n_val == 0 || n_test == 0 || n_val + n_test >= n_rows {
        return Err(Error::Split(format!(
            "{n_rows} rows cannot give every part at least one row with fractions {fractions:?}"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng::rng(seed));
    let n_train = n_rows - n_val - n_test;
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(DataSplit { train, val, test })
}

/// Seeded train/validation split of `rows`. When `labels` is given (binary
/// classification), the split is stratified so both parts see both classes
/// whenever a class has at least two rows.
pub fn make_train_val_split(
    rows: &[usize],
    val_fraction: f64,
    seed: u64,
    labels: Option<&[f64]>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Split(format!("validation fraction {val_fraction} not in (0,1)")));
    }
    if rows.len() < 4 {
        return Err(Error::TooFewRows { needed: 4, got: rows.len() });
    }
    let mut rng = rng::rng(seed);
    let groups: Vec<Vec<usize>> = match labels {
        Some(labels) => {
            if labels.len() != rows.len() {
                return Err(Error::LengthMismatch {
                    expected: rows.len(),
                    actual: labels.len(),
                });
            }
            let mut neg = Vec::new();
            let mut pos = Vec::new();
            for (k, &r) in rows.iter().enumerate() {
                if labels[k] == 1.0 {
                    pos.push(r);
                } else {
                    neg.push(r);
                }
            }
            vec![neg, pos]
        }
        None => vec![rows.to_vec()],
    };
    let mut train = Vec::with_capacity(rows.len());
    let mut val = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let mut n_val = part_size(group.len(), val_fraction);
        if n_val == 0 && group.len() >= 2 {
            n_val = 1;
        }
        if n_val >= group.len() && group.len() >= 2 {
            n_val = group.len() - 1;
        }
        val.extend_from_slice(&group[..n_val]);
        train.extend_from_slice(&group[n_val..]);
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Split("empty train or validation part".into()));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Reads an `id,part` CSV assigning each row id to train, val or test.
pub fn load_split_file(path: &Path, row_ids: &[String]) -> Result<DataSplit> {
    let mut reader = open_csv(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["id", "part"] {
        return Err(Error::Parse {
            line: 1,
            message: "split file header must be `id,part`".into(),
        });
    }
    let index: HashMap<&str, usize> = row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut seen = vec![false; row_ids.len()];
    let mut split = DataSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = record[0].trim();
        let &row = index
            .get(id)
            .ok_or_else(|| Error::Split(format!("line {line}: unknown row id `{id}`")))?;
        if seen[row] {
            return Err(Error::Split(format!("line {line}: row id `{id}` assigned twice")));
        }
        seen[row] = true;
        match record[1].trim() {
            "train" => split.train.push(row),
            "val" => split.val.push(row),
            "test" => split.test.push(row),
            other => {
                return Err(Error::Split(format!("line {line}: unknown part `{other}`")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Split(format!("row id `{}` missing from split file", row_ids[missing])));
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn write_split_file(path: &Path, split: &DataSplit, row_ids: &[String]) -> Result<()> {
    let mut part = vec![""; row_ids.len()];
    for &i in &split.train {
        part[i] = "train";
    }
    for &i in &split.val {
        part[i] = "val";
    }
    for &i in &split.test {
        part[i] = "test";
    }
    let mut out = String::from("id,part\n");
    for (id, p) in row_ids.iter().zip(part) {
        if !p.is_empty() {
            out.push_str(id);
            out.push(',');
            out.push_str(p);
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
