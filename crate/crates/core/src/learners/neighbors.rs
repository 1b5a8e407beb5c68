//! k-nearest-neighbour averaging (regression mean or class-1 fraction).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl Knn {
    /// `k` is capped at the number of training rows.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], k: usize) -> Self {
        Knn {
            k: k.clamp(1, x.nrows()),
            x: x.clone(),
            y: y.to_vec(),
        }
    }

    /// Mean target of the `k` nearest training rows under Euclidean
    /// distance; equal distances are resolved by lower training index.
    pub fn predict(&self, q: &DMatrix<f64>) -> Vec<f64> {
        let n = self.x.nrows();
        let p = self.x.ncols();
        // row-major copy so each distance reads contiguous memory
        let train: Vec<f64> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| self.x[(i, j)]).collect();
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut row = vec![0.0; p];
        (0..q.nrows())
            .map(|r| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = q[(r, j)];
                }
                dist.clear();
                for i in 0..n {
                    let t = &train[i * p..(i + 1) * p];
                    let d: f64 = t.iter().zip(&row).map(|(a, b)| (a - b) * (a - b)).sum();
                    dist.push((d, i));
                }
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < n {
                    dist.select_nth_unstable_by(self.k - 1, cmp);
                }
                dist[..self.k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
            })
            .collect()
    }
}
