//! Regression sub-model catalogue.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::boosting::{BoostingLoss, GradientBoosting};
use super::forest::RandomForest;
use super::kernel::{fit_gp_regression, KernelRegressor, RbfInterpolator};
use super::linear::{fit_lasso, fit_ridge, LinearModel};
use super::neighbors::Knn;
use super::neural::{Architecture, NetLoss, NeuralModel};
use super::params::{self, Hyperparams, ParamDef};
use super::tree::Criterion;
use super::{boosting_params, check_training_data, default_names, forest_params, train_params, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorKind {
    Lasso,
    Ridge,
    Knn,
    KernelRidge,
    RandomForest,
    GradientBoostedTrees,
    GaussianProcess,
    RbfInterpolation,
    Mlp,
    Resnet,
}

impl RegressorKind {
    /// Catalogue order.
    pub const ALL: [RegressorKind; 10] = [
        RegressorKind::Lasso,
        RegressorKind::Ridge,
        RegressorKind::Knn,
        RegressorKind::KernelRidge,
        RegressorKind::RandomForest,
        RegressorKind::GradientBoostedTrees,
        RegressorKind::GaussianProcess,
        RegressorKind::RbfInterpolation,
        RegressorKind::Mlp,
        RegressorKind::Resnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Lasso => "lasso",
            RegressorKind::Ridge => "ridge",
            RegressorKind::Knn => "knn",
            RegressorKind::KernelRidge => "kernel-ridge",
            RegressorKind::RandomForest => "random-forest",
            RegressorKind::GradientBoostedTrees => "gradient-boosted-trees",
            RegressorKind::GaussianProcess => "gaussian-process",
            RegressorKind::RbfInterpolation => "rbf-interpolation",
            RegressorKind::Mlp => "mlp",
            RegressorKind::Resnet => "resnet",
        }
    }

    pub fn schema(self) -> &'static [ParamDef] {
        match self {
            RegressorKind::Lasso => params::LASSO,
            RegressorKind::Ridge => params::RIDGE,
            RegressorKind::Knn => params::KNN,
            RegressorKind::KernelRidge => params::KERNEL_RIDGE,
            RegressorKind::RandomForest => params::FOREST,
            RegressorKind::GradientBoostedTrees => params::BOOSTING,
            RegressorKind::GaussianProcess => params::GP_REGRESSION,
            RegressorKind::RbfInterpolation => params::RBF,
            RegressorKind::Mlp => params::MLP,
            RegressorKind::Resnet => params::RESNET,
        }
    }

    pub fn catalogue_index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("kind is in the catalogue")
    }

    /// Whether the fitted model exposes its own feature importances.
    pub fn has_builtin_importance(self) -> bool {
        matches!(
            self,
            RegressorKind::Lasso
                | RegressorKind::Ridge
                | RegressorKind::RandomForest
                | RegressorKind::GradientBoostedTrees
        )
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    params: Hyperparams,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind, seed: u64) -> Self {
        RegressorSpec {
            kind,
            params: Hyperparams::new(),
            seed,
        }
    }

    /// Sets one hyperparameter, validating it against the kind's schema.
    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        self.params.set(name, value);
        self.params.validate(self.kind.name(), self.kind.schema())?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Effective value (explicit or schema default).
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

    /// Fewest training rows the kind accepts for `p` features.
    pub fn min_rows(&self, p: usize) -> usize {
        match self.kind {
            RegressorKind::Knn => self.usize_param("k").max(2),
            RegressorKind::RbfInterpolation => p + 2,
            RegressorKind::Mlp | RegressorKind::Resnet => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RegressorModel {
    Linear(LinearModel),
    Knn(Knn),
    Kernel(KernelRegressor),
    Forest(RandomForest),
    Boosting(GradientBoosting),
    Rbf(RbfInterpolator),
    Neural(NeuralModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub spec: RegressorSpec,
    pub feature_names: Vec<String>,
    pub model: RegressorModel,
}

impl TrainedRegressor {
    /// Renames the training features; the count must match.
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

pub fn fit_regressor(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainedRegressor> {
    spec.validate()?;
    check_training_data(x, y, spec.min_rows(x.ncols()))?;
    let model = match spec.kind {
        RegressorKind::Lasso => {
            let fit = fit_lasso(
                x,
                y,
                spec.param("alpha"),
                spec.param("tol"),
                spec.usize_param("max_sweeps"),
            );
            if !fit.converged {
                log::warn!("lasso stopped after {} sweeps without converging", fit.objective.len());
            }
            RegressorModel::Linear(fit.model)
        }
        RegressorKind::Ridge => RegressorModel::Linear(fit_ridge(x, y, spec.param("alpha"))?),
        RegressorKind::Knn => RegressorModel::Knn(Knn::fit(x, y, spec.usize_param("k"))),
        RegressorKind::KernelRidge => RegressorModel::Kernel(KernelRegressor::fit(
            x,
            y,
            spec.param("alpha"),
            spec.param("bandwidth"),
            false,
        )?),
        RegressorKind::RandomForest => RegressorModel::Forest(RandomForest::fit(
            x,
            y,
            forest_params(|n| spec.param(n)),
            Criterion::Variance,
            spec.seed,
        )),
        RegressorKind::GradientBoostedTrees => RegressorModel::Boosting(GradientBoosting::fit(
            x,
            y,
            boosting_params(|n| spec.param(n)),
            BoostingLoss::SquaredError,
            spec.seed,
        )),
        RegressorKind::GaussianProcess => RegressorModel::Kernel(fit_gp_regression(
            x,
            y,
            spec.param("noise"),
            spec.param("bandwidth"),
            spec.usize_param("max_rows"),
            spec.seed,
        )?),
        RegressorKind::RbfInterpolation => RegressorModel::Rbf(RbfInterpolator::fit(
            x,
            y,
            spec.param("smoothing"),
            spec.param("bandwidth"),
        )?),
        RegressorKind::Mlp | RegressorKind::Resnet => {
            let (arch, depth) = if spec.kind == RegressorKind::Mlp {
                (Architecture::Mlp, spec.usize_param("layers"))
            } else {
                (Architecture::ResNet, spec.usize_param("blocks"))
            };
            RegressorModel::Neural(NeuralModel::fit(
                arch,
                NetLoss::SquaredError,
                x,
                y,
                spec.usize_param("width"),
                depth,
                train_params(|n| spec.param(n)),
                spec.seed,
            )?)
        }
    };
    Ok(TrainedRegressor {
        spec: spec.clone(),
        feature_names: default_names(x.ncols()),
        model,
    })
}

pub fn predict_regressor(model: &TrainedRegressor, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::LengthMismatch {
            expected: model.n_features(),
            actual: x.ncols(),
        });
    }
    let out = match &model.model {
        RegressorModel::Linear(m) => m.decision(x),
        RegressorModel::Knn(m) => m.predict(x),
        RegressorModel::Kernel(m) => m.predict(x),
        RegressorModel::Forest(m) => m.predict(x),
        RegressorModel::Boosting(m) => m.predict(x),
        RegressorModel::Rbf(m) => m.predict(x),
        RegressorModel::Neural(m) => m.predict(x),
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} predictions", model.spec.kind)));
    }
    Ok(out)
}

/// Built-in importances (`|coefficient|` for linear kinds, impurity or gain
/// totals for tree ensembles); `None` for kinds that need permutation.
pub fn regressor_importance(model: &TrainedRegressor) -> Option<Vec<f64>> {
    match &model.model {
        RegressorModel::Linear(m) => Some(m.abs_coef()),
        RegressorModel::Forest(m) => Some(m.importance().to_vec()),
        RegressorModel::Boosting(m) => Some(m.importance().to_vec()),
        _ => None,
    }
}

/// Predictive variance in standardised target units, for Gaussian-process
/// models.
pub fn regressor_variance(model: &TrainedRegressor, x: &DMatrix<f64>) -> Option<Vec<f64>> {
    match (&model.model, model.spec.kind) {
        (RegressorModel::Kernel(m), RegressorKind::GaussianProcess) => m.predict_variance(x),
        _ => None,
    }
}

impl Predictor for TrainedRegressor {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn feature_names(&self) -> Vec<String> {
        self.feature_names.clone()
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict_regressor(self, x)
    }
}
