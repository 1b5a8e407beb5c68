//! Sub-model catalogues for regression and binary classification.

pub mod boosting;
pub mod classification;
pub mod discriminant;
pub mod forest;
pub mod kernel;
pub mod linear;
pub mod neighbors;
pub mod neural;
pub mod params;
pub mod regression;
pub mod tree;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use classification::{
    classifier_importance, classify, fit_classifier, predict_proba, ClassifierKind, ClassifierSpec,
    TrainedClassifier,
};
pub use params::Hyperparams;
pub use regression::{
    fit_regressor, predict_regressor, regressor_importance, RegressorKind, RegressorSpec, TrainedRegressor,
};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_finite_slice};
use crate::tabular::Task;
use boosting::BoostingParams;
use forest::ForestParams;
use neural::TrainParams;

/// Anything that maps a feature matrix to one score per row (regression
/// value or class-1 probability).
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>>;

    fn feature_names(&self) -> Vec<String> {
        default_names(self.n_features())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerSpec {
    Regression(RegressorSpec),
    Classification(ClassifierSpec),
}

impl LearnerSpec {
    pub fn task(&self) -> Task {
        match self {
            LearnerSpec::Regression(_) => Task::Regression,
            LearnerSpec::Classification(_) => Task::Classification,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LearnerSpec::Regression(s) => s.kind.name(),
            LearnerSpec::Classification(s) => s.kind.name(),
        }
    }

    pub fn catalogue_index(&self) -> usize {
        match self {
            LearnerSpec::Regression(s) => s.kind.catalogue_index(),
            LearnerSpec::Classification(s) => s.kind.catalogue_index(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            LearnerSpec::Regression(s) => s.seed,
            LearnerSpec::Classification(s) => s.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            LearnerSpec::Regression(s) => LearnerSpec::Regression(s.clone().with_seed(seed)),
            LearnerSpec::Classification(s) => LearnerSpec::Classification(s.clone().with_seed(seed)),
        }
    }

    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        Ok(match self {
            LearnerSpec::Regression(s) => LearnerSpec::Regression(s.clone().with_param(name, value)?),
            LearnerSpec::Classification(s) => LearnerSpec::Classification(s.clone().with_param(name, value)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Regression(s) => s.validate(),
            LearnerSpec::Classification(s) => s.validate(),
        }
    }

    pub fn has_builtin_importance(&self) -> bool {
        match self {
            LearnerSpec::Regression(s) => s.kind.has_builtin_importance(),
            LearnerSpec::Classification(s) => s.kind.has_builtin_importance(),
        }
    }

    /// Catalogue default for a kind name under `task`.
    pub fn from_kind_name(task: Task, name: &str, seed: u64) -> Result<Self> {
        Ok(match task {
            Task::Regression => LearnerSpec::Regression(RegressorSpec::new(name.parse()?, seed)),
            Task::Classification => LearnerSpec::Classification(ClassifierSpec::new(name.parse()?, seed)),
        })
    }

    pub fn fit(&self, x: &DMatrix<f64>, y: &[f64], feature_names: &[String]) -> Result<TrainedLearner> {
        Ok(match self {
            LearnerSpec::Regression(s) => {
                TrainedLearner::Regression(fit_regressor(s, x, y)?.with_feature_names(feature_names.to_vec())?)
            }
            LearnerSpec::Classification(s) => {
                TrainedLearner::Classification(fit_classifier(s, x, y)?.with_feature_names(feature_names.to_vec())?)
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TrainedLearner {
    Regression(TrainedRegressor),
    Classification(TrainedClassifier),
}

impl TrainedLearner {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedLearner::Regression(m) => m.spec.kind.name(),
            TrainedLearner::Classification(m) => m.spec.kind.name(),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedLearner::Regression(m) => &m.feature_names,
            TrainedLearner::Classification(m) => &m.feature_names,
        }
    }

    pub fn builtin_importance(&self) -> Option<Vec<f64>> {
        match self {
            TrainedLearner::Regression(m) => regressor_importance(m),
            TrainedLearner::Classification(m) => classifier_importance(m),
        }
    }
}

impl Predictor for TrainedLearner {
    fn n_features(&self) -> usize {
        TrainedLearner::feature_names(self).len()
    }

    fn feature_names(&self) -> Vec<String> {
        TrainedLearner::feature_names(self).to_vec()
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            TrainedLearner::Regression(m) => predict_regressor(m, x),
            TrainedLearner::Classification(m) => predict_proba(m, x),
        }
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

pub(crate) fn check_training_data(x: &DMatrix<f64>, y: &[f64], min_rows: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(Error::NoFeatures);
    }
    if x.nrows() < min_rows {
        return Err(Error::TooFewRows {
            needed: min_rows,
            got: x.nrows(),
        });
    }
    ensure_finite(x, "training features")?;
    ensure_finite_slice(y, "training targets")
}

pub(crate) fn forest_params(get: impl Fn(&str) -> f64) -> ForestParams {
    let depth = get("max_depth") as usize;
    let features = get("max_features") as usize;
    ForestParams {
        n_trees: get("n_trees") as usize,
        max_depth: (depth > 0).then_some(depth),
        min_leaf: get("min_leaf") as usize,
        max_features: (features > 0).then_some(features),
        bootstrap: get("bootstrap") == 1.0,
    }
}

pub(crate) fn boosting_params(get: impl Fn(&str) -> f64) -> BoostingParams {
    BoostingParams {
        n_stages: get("n_stages") as usize,
        max_depth: get("max_depth") as usize,
        learning_rate: get("learning_rate"),
        lambda: get("lambda"),
        min_child_weight: get("min_child_weight"),
    }
}

pub(crate) fn train_params(get: impl Fn(&str) -> f64) -> TrainParams {
    TrainParams {
        batch_size: get("batch_size") as usize,
        max_epochs: get("max_epochs") as usize,
        patience: get("patience") as usize,
        learning_rate: get("learning_rate"),
        holdout: get("holdout"),
    }
}
