//! Heterogeneous strong-learner ensembles for tabular property prediction.
//!
//! A [`metamodel::MetaModel`] trains a roster of diverse regressors or
//! binary classifiers on independent train/validation splits, keeps the best
//! by validation score, prunes weak features, retrains, and averages the
//! survivors with score-derived weights.

pub mod error;
pub mod importance;
pub mod learners;
pub mod linalg;
pub mod metamodel;
pub mod metrics;
pub mod persist;
pub mod rng;
pub mod significance;
pub mod synth;
pub mod tabular;

pub use error::{Error, ErrorCategory, Result};
pub use metamodel::{fit_metamodel, metamodel_importance, metamodel_predict, MetaModel, MetaModelConfig};
pub use metrics::MetricKind;
pub use tabular::{FeatureTable, Task};
