//! Binary classification sub-model catalogue. Labels are 0/1 and every
//! model reports the probability of class 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::boosting::{BoostingLoss, GradientBoosting};
use super::discriminant::{fit_lda, NaiveBayes, Qda};
use super::forest::RandomForest;
use super::kernel::GpClassifier;
use super::linear::{fit_logistic, LinearModel};
use super::neighbors::Knn;
use super::neural::{Architecture, NetLoss, NeuralModel};
use super::params::{self, Hyperparams, ParamDef};
use super::tree::Criterion;
use super::{boosting_params, check_training_data, default_names, forest_params, train_params, Predictor};
use crate::error::{Error, Result};
use crate::linalg::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Knn,
    Lda,
    Qda,
    Logistic,
    NaiveBayes,
    RandomForest,
    GradientBoostedTrees,
    GaussianProcess,
    Mlp,
    Resnet,
}

impl ClassifierKind {
    /// Catalogue order.
    pub const ALL: [ClassifierKind; 10] = [
        ClassifierKind::Knn,
        ClassifierKind::Lda,
        ClassifierKind::Qda,
        ClassifierKind::Logistic,
        ClassifierKind::NaiveBayes,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoostedTrees,
        ClassifierKind::GaussianProcess,
        ClassifierKind::Mlp,
        ClassifierKind::Resnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Lda => "lda",
            ClassifierKind::Qda => "qda",
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::NaiveBayes => "naive-bayes",
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::GradientBoostedTrees => "gradient-boosted-trees",
            ClassifierKind::GaussianProcess => "gaussian-process",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Resnet => "resnet",
        }
    }

    pub fn schema(self) -> &'static [ParamDef] {
        match self {
            ClassifierKind::Knn => params::KNN,
            ClassifierKind::Lda => params::LDA,
            ClassifierKind::Qda => params::QDA,
            ClassifierKind::Logistic => params::LOGISTIC,
            ClassifierKind::NaiveBayes => params::NAIVE_BAYES,
            ClassifierKind::RandomForest => params::FOREST,
            ClassifierKind::GradientBoostedTrees => params::BOOSTING,
            ClassifierKind::GaussianProcess => params::GP_CLASSIFICATION,
            ClassifierKind::Mlp => params::MLP,
            ClassifierKind::Resnet => params::RESNET,
        }
    }

    pub fn catalogue_index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("kind is in the catalogue")
    }

    pub fn has_builtin_importance(self) -> bool {
        matches!(
            self,
            ClassifierKind::Lda
                | ClassifierKind::Logistic
                | ClassifierKind::RandomForest
                | ClassifierKind::GradientBoostedTrees
        )
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    params: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            params: Hyperparams::new(),
            seed,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        self.params.set(name, value);
        self.params.validate(self.kind.name(), self.kind.schema())?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params.get(self.kind.schema(), name)
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.kind.name(), self.kind.schema())
    }

    fn usize_param(&self, name: &str) -> usize {
        self.param(name) as usize
    }

    pub fn min_rows(&self, _p: usize) -> usize {
        match self.kind {
            ClassifierKind::Knn => self.usize_param("k").max(2),
            ClassifierKind::Mlp | ClassifierKind::Resnet => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ClassifierModel {
    /// Logistic link over a linear score (logistic regression, LDA).
    Linear(LinearModel),
    Knn(Knn),
    Qda(Qda),
    NaiveBayes(NaiveBayes),
    Forest(RandomForest),
    Boosting(GradientBoosting),
    GaussianProcess(GpClassifier),
    Neural(NeuralModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub feature_names: Vec<String>,
    pub model: ClassifierModel,
}

impl TrainedClassifier {
    /// A logistic model with fixed weights, predicting
    /// `1 / (1 + exp(-(w.x + b)))`.
    pub fn logistic_from_parts(coef: Vec<f64>, intercept: f64) -> Self {
        TrainedClassifier {
            spec: ClassifierSpec::new(ClassifierKind::Logistic, 0),
            feature_names: default_names(coef.len()),
            model: ClassifierModel::Linear(LinearModel { coef, intercept }),
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch {
                expected: self.feature_names.len(),
                actual: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

pub fn fit_classifier(spec: &ClassifierSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainedClassifier> {
    spec.validate()?;
    check_training_data(x, y, spec.min_rows(x.ncols()))?;
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::invalid(format!("class labels must be 0 or 1, got {bad}")));
    }
    let ones = y.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::SingleClass(format!("{} training labels", spec.kind)));
    }
    let model = match spec.kind {
        ClassifierKind::Knn => ClassifierModel::Knn(Knn::fit(x, y, spec.usize_param("k"))),
        ClassifierKind::Lda => ClassifierModel::Linear(fit_lda(x, y, spec.param("reg"))?),
        ClassifierKind::Qda => {
            ClassifierModel::Qda(Qda::fit(x, y, spec.param("reg"), spec.param("pooled") == 1.0)?)
        }
        ClassifierKind::Logistic => ClassifierModel::Linear(
            fit_logistic(
                x,
                y,
                spec.param("alpha"),
                spec.usize_param("max_iter"),
                spec.param("tol"),
            )?
            .model,
        ),
        ClassifierKind::NaiveBayes => ClassifierModel::NaiveBayes(NaiveBayes::fit(x, y, spec.param("var_smoothing"))),
        ClassifierKind::RandomForest => ClassifierModel::Forest(RandomForest::fit(
            x,
            y,
            forest_params(|n| spec.param(n)),
            Criterion::Gini,
            spec.seed,
        )),
        ClassifierKind::GradientBoostedTrees => ClassifierModel::Boosting(GradientBoosting::fit(
            x,
            y,
            boosting_params(|n| spec.param(n)),
            BoostingLoss::Logistic,
            spec.seed,
        )),
        ClassifierKind::GaussianProcess => {
            let (model, trace) = GpClassifier::fit(
                x,
                y,
                spec.param("bandwidth"),
                spec.usize_param("max_rows"),
                spec.usize_param("max_iter"),
                spec.param("tol"),
                spec.seed,
            )?;
            if trace.gradient_norm > 1e-6 {
                log::warn!(
                    "Laplace mode search stopped with gradient norm {:.3e}",
                    trace.gradient_norm
                );
            }
            ClassifierModel::GaussianProcess(model)
        }
        ClassifierKind::Mlp | ClassifierKind::Resnet => {
            let (arch, depth) = if spec.kind == ClassifierKind::Mlp {
                (Architecture::Mlp, spec.usize_param("layers"))
            } else {
                (Architecture::ResNet, spec.usize_param("blocks"))
            };
            ClassifierModel::Neural(NeuralModel::fit(
                arch,
                NetLoss::Logistic,
                x,
                y,
                spec.usize_param("width"),
                depth,
                train_params(|n| spec.param(n)),
                spec.seed,
            )?)
        }
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        feature_names: default_names(x.ncols()),
        model,
    })
}

/// Probability of class 1 for every row.
pub fn predict_proba(model: &TrainedClassifier, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::LengthMismatch {
            expected: model.n_features(),
            actual: x.ncols(),
        });
    }
    let p = match &model.model {
        ClassifierModel::Linear(m) => m.decision(x).into_iter().map(sigmoid).collect(),
        ClassifierModel::Knn(m) => m.predict(x),
        ClassifierModel::Qda(m) => m.predict_proba(x),
        ClassifierModel::NaiveBayes(m) => m.predict_proba(x),
        ClassifierModel::Forest(m) => m.predict(x),
        ClassifierModel::Boosting(m) => m.predict(x),
        ClassifierModel::GaussianProcess(m) => m.predict_proba(x),
        ClassifierModel::Neural(m) => m.predict(x),
    };
    if p.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} probabilities", model.spec.kind)));
    }
    Ok(p.into_iter().map(|v: f64| v.clamp(0.0, 1.0)).collect())
}

/// Hard labels: 1 where the probability reaches `threshold`, which must lie
/// strictly inside (0, 1).
pub fn classify(model: &TrainedClassifier, x: &DMatrix<f64>, threshold: f64) -> Result<Vec<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(predict_proba(model, x)?
        .into_iter()
        .map(|p| (p >= threshold) as u8)
        .collect())
}

pub fn classifier_importance(model: &TrainedClassifier) -> Option<Vec<f64>> {
    match &model.model {
        ClassifierModel::Linear(m) => Some(m.abs_coef()),
        ClassifierModel::Forest(m) => Some(m.importance().to_vec()),
        ClassifierModel::Boosting(m) => Some(m.importance().to_vec()),
        _ => None,
    }
}

impl Predictor for TrainedClassifier {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn feature_names(&self) -> Vec<String> {
        self.feature_names.clone()
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict_proba(self, x)
    }
}
