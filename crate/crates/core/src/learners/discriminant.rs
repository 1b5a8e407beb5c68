//! Gaussian generative classifiers: LDA, QDA and Gaussian naive Bayes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::linear::LinearModel;
use crate::error::{Error, Result};
use crate::linalg::sigmoid;

struct ClassMoments {
    mean: [DVector<f64>; 2],
    /// Scatter matrices `sum (x - mu)(x - mu)'`.
    scatter: [DMatrix<f64>; 2],
    count: [usize; 2],
}

fn moments(x: &DMatrix<f64>, y: &[f64]) -> ClassMoments {
    let p = x.ncols();
    let mut mean = [DVector::zeros(p), DVector::zeros(p)];
    let mut count = [0usize; 2];
    for (i, t) in y.iter().enumerate() {
        let c = (*t > 0.5) as usize;
        mean[c] += x.row(i).transpose();
        count[c] += 1;
    }
    for c in 0..2 {
        mean[c] /= count[c].max(1) as f64;
    }
    let mut scatter = [DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    for (i, t) in y.iter().enumerate() {
        let c = (*t > 0.5) as usize;
        let d = x.row(i).transpose() - &mean[c];
        scatter[c].ger(1.0, &d, &d, 1.0);
    }
    ClassMoments { mean, scatter, count }
}

/// Adds `reg * trace(S)/p * I`, escalating `reg` tenfold (up to 1) until the
/// Cholesky factorisation succeeds.
fn regularised_cholesky(s: &DMatrix<f64>, reg: f64) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
    let p = s.nrows();
    let tr = s.trace() / p as f64;
    let scale = if tr > 0.0 { tr } else { 1.0 };
    let mut r = reg;
    loop {
        let mut m = s.clone();
        for i in 0..p {
            m[(i, i)] += r * scale;
        }
        if let Some(c) = m.clone().cholesky() {
            return Ok((c, m));
        }
        if r >= 1.0 {
            return Err(Error::NotPositiveDefinite { max_jitter: scale });
        }
        r = if r > 0.0 { (r * 10.0).min(1.0) } else { 1e-10 };
    }
}

fn pooled_covariance(m: &ClassMoments) -> DMatrix<f64> {
    let n = m.count[0] + m.count[1];
    (&m.scatter[0] + &m.scatter[1]) / (n.saturating_sub(2).max(1)) as f64
}

fn log_prior_ratio(m: &ClassMoments) -> f64 {
    (m.count[1] as f64 / m.count[0] as f64).ln()
}

/// Linear discriminant analysis, stored as its log-odds linear form.
pub fn fit_lda(x: &DMatrix<f64>, y: &[f64], reg: f64) -> Result<LinearModel> {
    let m = moments(x, y);
    let (chol, _) = regularised_cholesky(&pooled_covariance(&m), reg)?;
    let diff = &m.mean[1] - &m.mean[0];
    let w = chol.solve(&diff);
    let mid = (&m.mean[1] + &m.mean[0]) * 0.5;
    let intercept = -w.dot(&mid) + log_prior_ratio(&m);
    Ok(LinearModel {
        coef: w.iter().copied().collect(),
        intercept,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Qda {
    mean: [Vec<f64>; 2],
    /// Lower Cholesky factors of the class covariances.
    chol: [DMatrix<f64>; 2],
    /// `log prior - 0.5 log det` per class.
    offset: [f64; 2],
}

impl Qda {
    /// With `pooled`, both classes share the pooled covariance and the model
    /// reduces to LDA.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], reg: f64, pooled: bool) -> Result<Self> {
        let m = moments(x, y);
        let n = (m.count[0] + m.count[1]) as f64;
        let pooled_factor = if pooled {
            Some(regularised_cholesky(&pooled_covariance(&m), reg)?.0)
        } else {
            None
        };
        let mut chol: [DMatrix<f64>; 2] = [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)];
        let mut offset = [0.0; 2];
        for c in 0..2 {
            let l = match &pooled_factor {
                Some(f) => f.l(),
                None => {
                    let cov = &m.scatter[c] / (m.count[c].saturating_sub(1).max(1)) as f64;
                    regularised_cholesky(&cov, reg)?.0.l()
                }
            };
            let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            offset[c] = (m.count[c] as f64 / n).ln() - 0.5 * log_det;
            chol[c] = l;
        }
        Ok(Qda {
            mean: [m.mean[0].iter().copied().collect(), m.mean[1].iter().copied().collect()],
            chol,
            offset,
        })
    }

    fn log_density(&self, c: usize, row: &DVector<f64>) -> f64 {
        let d = row - DVector::from_column_slice(&self.mean[c]);
        let z = self.chol[c]
            .solve_lower_triangular(&d)
            .expect("Cholesky factor has a positive diagonal");
        self.offset[c] - 0.5 * z.norm_squared()
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row = x.row(i).transpose();
                sigmoid(self.log_density(1, &row) - self.log_density(0, &row))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaiveBayes {
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
    log_prior: [f64; 2],
}

impl NaiveBayes {
    /// Class variances are floored by `var_smoothing` times the largest
    /// overall feature variance.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], var_smoothing: f64) -> Self {
        let m = moments(x, y);
        let n = x.nrows() as f64;
        let max_var = x
            .column_iter()
            .map(|c| {
                let mu = c.sum() / n;
                c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n
            })
            .fold(0.0_f64, f64::max);
        let eps = (var_smoothing * max_var).max(f64::MIN_POSITIVE);
        let var = [0, 1].map(|c| {
            let k = m.count[c].max(1) as f64;
            m.scatter[c].diagonal().iter().map(|s| s / k + eps).collect::<Vec<f64>>()
        });
        NaiveBayes {
            mean: [0, 1].map(|c| m.mean[c].iter().copied().collect()),
            var,
            log_prior: [0, 1].map(|c| (m.count[c] as f64 / n).ln()),
        }
    }

    fn log_joint(&self, c: usize, x: &DMatrix<f64>, i: usize) -> f64 {
        let mut s = self.log_prior[c];
        for j in 0..x.ncols() {
            let v = self.var[c][j];
            let d = x[(i, j)] - self.mean[c][j];
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + d * d / v);
        }
        s
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| sigmoid(self.log_joint(1, x, i) - self.log_joint(0, x, i)))
            .collect()
    }
}
