//! Second-order gradient-boosted trees (squared error or logistic loss).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, Criterion, Tree, TreeParams};
use crate::linalg::{mean, sigmoid, softplus};
use crate::rng::rng;

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostingParams {
    pub n_stages: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoostingLoss {
    SquaredError,
    Logistic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientBoosting {
    loss: BoostingLoss,
    base: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    importance: Vec<f64>,
    training_loss: Vec<f64>,
}

impl GradientBoosting {
    pub(crate) fn fit(x: &DMatrix<f64>, y: &[f64], params: BoostingParams, loss: BoostingLoss, seed: u64) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let base = match loss {
            BoostingLoss::SquaredError => mean(y),
            BoostingLoss::Logistic => {
                let prior = mean(y).clamp(1e-12, 1.0 - 1e-12);
                (prior / (1.0 - prior)).ln()
            }
        };
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_leaf: 1,
            min_child_weight: params.min_child_weight,
            max_features: p,
            criterion: Criterion::Newton { lambda: params.lambda },
        };
        let rows: Vec<usize> = (0..n).collect();
        let mut f = vec![base; n];
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.n_stages);
        let mut importance = vec![0.0; p];
        let mut training_loss = vec![mean_loss(loss, &f, y)];
        let mut rng = rng(seed);
        for _ in 0..params.n_stages {
            for i in 0..n {
                match loss {
                    BoostingLoss::SquaredError => {
                        g[i] = f[i] - y[i];
                        h[i] = 1.0;
                    }
                    BoostingLoss::Logistic => {
                        let q = sigmoid(f[i]);
                        g[i] = q - y[i];
                        h[i] = (q * (1.0 - q)).max(1e-16);
                    }
                }
            }
            let (tree, gains) = build_tree(x, &rows, &g, &h, tree_params, &mut rng);
            for i in 0..n {
                f[i] += params.learning_rate * tree.predict_row(x, i);
            }
            for (acc, v) in importance.iter_mut().zip(&gains) {
                *acc += v;
            }
            training_loss.push(mean_loss(loss, &f, y));
            trees.push(tree);
        }
        GradientBoosting {
            loss,
            base,
            learning_rate: params.learning_rate,
            trees,
            importance,
            training_loss,
        }
    }

    /// Raw additive score (log-odds for the logistic loss).
    pub fn decision(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                self.base
                    + self.learning_rate * self.trees.iter().map(|t| t.predict_row(x, i)).sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let d = self.decision(x);
        match self.loss {
            BoostingLoss::SquaredError => d,
            BoostingLoss::Logistic => d.into_iter().map(sigmoid).collect(),
        }
    }

    /// Total split gain per feature, summed over stages.
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    /// Mean training loss before the first stage and after each stage.
    pub fn training_loss(&self) -> &[f64] {
        &self.training_loss
    }
}

fn mean_loss(loss: BoostingLoss, f: &[f64], y: &[f64]) -> f64 {
    let n = f.len() as f64;
    match loss {
        BoostingLoss::SquaredError => f.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        BoostingLoss::Logistic => f.iter().zip(y).map(|(z, t)| softplus(*z) - t * z).sum::<f64>() / n,
    }
}
