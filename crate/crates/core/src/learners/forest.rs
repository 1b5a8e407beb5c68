//! Random forests: bagged exact trees with per-node feature subsampling.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, Criterion, Tree, TreeParams};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` selects `ceil(p / 3)`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<Tree>,
    importance: Vec<f64>,
}

impl RandomForest {
    /// Trees are grown independently from streams derived from `seed`, so
    /// the result does not depend on the number of worker threads.
    pub(crate) fn fit(x: &DMatrix<f64>, y: &[f64], params: ForestParams, criterion: Criterion, seed: u64) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let max_features = params
            .max_features
            .unwrap_or_else(|| p.div_ceil(3))
            .clamp(1, p.max(1));
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            min_child_weight: 0.0,
            max_features,
            criterion,
        };
        let grown: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(seed, t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let targets: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
                build_tree(x, &rows, &targets, &[], tree_params, &mut rng)
            })
            .collect();

        let mut importance = vec![0.0; p];
        let mut counted = 0usize;
        for (_, gains) in &grown {
            let total: f64 = gains.iter().sum();
            if total > 0.0 {
                for (acc, g) in importance.iter_mut().zip(gains) {
                    *acc += g / total;
                }
                counted += 1;
            }
        }
        if counted > 0 {
            for v in &mut importance {
                *v /= counted as f64;
            }
        }
        RandomForest {
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            importance,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.nrows())
            .map(|i| self.trees.iter().map(|t| t.predict_row(x, i)).sum::<f64>() / k)
            .collect()
    }

    /// Mean over trees of each tree's normalised impurity decrease.
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
