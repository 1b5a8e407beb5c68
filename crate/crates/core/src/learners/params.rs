//! Kind-specific hyperparameter schemas.
//!
//! Hyperparameters are a flat `name -> f64` map. Each learner kind publishes
//! a schema; unknown names and out-of-range values are rejected when a spec
//! is built, and absent names fall back to the schema default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

const fn real(name: &'static str, default: f64, min: f64, max: f64) -> ParamDef {
    ParamDef {
        name,
        default,
        min,
        max,
        integer: false,
    }
}

const fn int(name: &'static str, default: f64, min: f64, max: f64) -> ParamDef {
    ParamDef {
        name,
        default,
        min,
        max,
        integer: true,
    }
}

const INF: f64 = f64::INFINITY;

pub const LASSO: &[ParamDef] = &[
    real("alpha", 0.01, 0.0, INF),
    real("tol", 1e-6, 1e-15, 1.0),
    int("max_sweeps", 10_000.0, 1.0, 1e7),
];

pub const RIDGE: &[ParamDef] = &[real("alpha", 1.0, 0.0, INF)];

pub const KNN: &[ParamDef] = &[int("k", 5.0, 1.0, 1e6)];

/// `bandwidth = 0` selects the median pairwise training distance.
pub const KERNEL_RIDGE: &[ParamDef] = &[real("alpha", 1e-3, 0.0, INF), real("bandwidth", 0.0, 0.0, INF)];

/// `max_depth = 0` means unlimited; `max_features = 0` means `ceil(p / 3)`.
pub const FOREST: &[ParamDef] = &[
    int("n_trees", 200.0, 1.0, 1e5),
    int("max_depth", 0.0, 0.0, 1e4),
    int("min_leaf", 1.0, 1.0, 1e6),
    int("max_features", 0.0, 0.0, 1e6),
    int("bootstrap", 1.0, 0.0, 1.0),
];

pub const BOOSTING: &[ParamDef] = &[
    int("n_stages", 300.0, 0.0, 1e5),
    int("max_depth", 6.0, 1.0, 64.0),
    real("learning_rate", 0.1, 1e-6, 1.0),
    real("lambda", 1.0, 0.0, INF),
    real("min_child_weight", 1.0, 0.0, INF),
];

pub const GP_REGRESSION: &[ParamDef] = &[
    real("noise", 1e-2, 0.0, INF),
    real("bandwidth", 0.0, 0.0, INF),
    int("max_rows", 2000.0, 2.0, 1e6),
];

pub const RBF: &[ParamDef] = &[real("smoothing", 1e-3, 0.0, INF), real("bandwidth", 0.0, 0.0, INF)];

pub const MLP: &[ParamDef] = &[
    int("width", 128.0, 1.0, 1e5),
    int("layers", 2.0, 1.0, 64.0),
    int("batch_size", 64.0, 1.0, 1e6),
    int("max_epochs", 200.0, 1.0, 1e6),
    int("patience", 20.0, 1.0, 1e6),
    real("learning_rate", 1e-3, 1e-9, 1.0),
    real("holdout", 0.1, 0.0, 0.5),
];

pub const RESNET: &[ParamDef] = &[
    int("width", 128.0, 1.0, 1e5),
    int("blocks", 3.0, 1.0, 64.0),
    int("batch_size", 64.0, 1.0, 1e6),
    int("max_epochs", 200.0, 1.0, 1e6),
    int("patience", 20.0, 1.0, 1e6),
    real("learning_rate", 1e-3, 1e-9, 1.0),
    real("holdout", 0.1, 0.0, 0.5),
];

pub const LDA: &[ParamDef] = &[real("reg", 1e-4, 0.0, 1.0)];

/// `pooled = 1` forces a single pooled covariance for both classes.
pub const QDA: &[ParamDef] = &[real("reg", 1e-4, 0.0, 1.0), int("pooled", 0.0, 0.0, 1.0)];

pub const LOGISTIC: &[ParamDef] = &[
    real("alpha", 1e-2, 0.0, INF),
    int("max_iter", 100.0, 1.0, 1e6),
    real("tol", 1e-8, 1e-15, 1.0),
];

pub const NAIVE_BAYES: &[ParamDef] = &[real("var_smoothing", 1e-9, 0.0, 1.0)];

pub const GP_CLASSIFICATION: &[ParamDef] = &[
    real("bandwidth", 0.0, 0.0, INF),
    int("max_rows", 2000.0, 2.0, 1e6),
    int("max_iter", 100.0, 1.0, 1e6),
    real("tol", 1e-9, 1e-15, 1.0),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams(BTreeMap<String, f64>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub(crate) fn validate(&self, kind: &str, schema: &[ParamDef]) -> Result<()> {
        for (name, value) in &self.0 {
            let def = schema.iter().find(|d| d.name == name).ok_or_else(|| Error::Hyperparameter {
                kind: kind.to_string(),
                message: format!("unknown parameter `{name}`"),
            })?;
            check_value(kind, def, *value)?;
        }
        Ok(())
    }

    pub(crate) fn get(&self, schema: &[ParamDef], name: &str) -> f64 {
        let def = schema
            .iter()
            .find(|d| d.name == name)
            .unwrap_or_else(|| panic!("parameter `{name}` is not in the schema"));
        self.0.get(name).copied().unwrap_or(def.default)
    }
}

fn check_value(kind: &str, def: &ParamDef, value: f64) -> Result<()> {
    let bad = |message: String| Error::Hyperparameter {
        kind: kind.to_string(),
        message,
    };
    if value.is_nan() || value < def.min || value > def.max {
        return Err(bad(format!(
            "`{}` = {value} outside [{}, {}]",
            def.name, def.min, def.max
        )));
    }
    if def.integer && value.fract() != 0.0 {
        return Err(bad(format!("`{}` must be an integer, got {value}", def.name)));
    }
    Ok(())
}
