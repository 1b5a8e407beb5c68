//! Linear learners: lasso (coordinate descent), ridge (normal equations) and
//! L2-penalised logistic regression (damped Newton).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, column_means, mean, sigmoid, softplus};

/// `w . x + b`, the fitted form of every linear learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let w = DVector::from_column_slice(&self.coef);
        (x * w).iter().map(|v| v + self.intercept).collect()
    }

    pub fn abs_coef(&self) -> Vec<f64> {
        self.coef.iter().map(|c| c.abs()).collect()
    }
}

/// Result of a lasso fit, with the objective recorded after every sweep.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub model: LinearModel,
    pub objective: Vec<f64>,
    pub converged: bool,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimises `(1/2n)||y - Xb - c||^2 + alpha ||b||_1` by cyclic coordinate
/// descent on internally standardised columns. Constant columns get a zero
/// coefficient. Convergence: the largest coefficient change in a sweep falls
/// below `tol` (relative to the largest coefficient, floored at 1).
pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], alpha: f64, tol: f64, max_sweeps: usize) -> LassoFit {
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    let y_mean = mean(y);
    let means = column_means(x);
    let mut scale = vec![0.0; p];
    let mut z = x.clone();
    for j in 0..p {
        let mut col = z.column_mut(j);
        col.add_scalar_mut(-means[j]);
        let s = (col.norm_squared() / nf).sqrt();
        if s > 0.0 {
            col /= s;
        }
        scale[j] = s;
    }
    let mut beta = vec![0.0; p];
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let objective_of = |resid: &[f64], beta: &[f64]| {
        resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * nf) + alpha * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut objective = Vec::new();
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if scale[j] == 0.0 {
                continue;
            }
            let col = z.column(j);
            let old = beta[j];
            let rho = col.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>() / nf + old;
            let new = soft_threshold(rho, alpha);
            if new != old {
                let d = new - old;
                for (r, c) in resid.iter_mut().zip(col.iter()) {
                    *r -= d * c;
                }
                beta[j] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        objective.push(objective_of(&resid, &beta));
        let biggest = beta.iter().fold(1.0_f64, |m, b| m.max(b.abs()));
        if max_delta <= tol * biggest {
            converged = true;
            break;
        }
    }
    let coef: Vec<f64> = (0..p)
        .map(|j| if scale[j] > 0.0 { beta[j] / scale[j] } else { 0.0 })
        .collect();
    let intercept = y_mean - coef.iter().zip(means.iter()).map(|(c, m)| c * m).sum::<f64>();
    LassoFit {
        model: LinearModel { coef, intercept },
        objective,
        converged,
    }
}

/// Ridge regression with an unpenalised intercept: solves
/// `(Xc'Xc + alpha I) b = Xc'yc` on centred data.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<LinearModel> {
    let p = x.ncols();
    let means = column_means(x);
    let y_mean = mean(y);
    let mut xc = x.clone();
    for j in 0..p {
        xc.column_mut(j).add_scalar_mut(-means[j]);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let mut gram = xc.tr_mul(&xc);
    for i in 0..p {
        gram[(i, i)] += alpha;
    }
    let rhs = xc.tr_mul(&yc);
    let coef = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("ridge normal equations".into()))?,
    };
    let intercept = y_mean - coef.dot(&means);
    Ok(LinearModel {
        coef: coef.iter().copied().collect(),
        intercept,
    })
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearModel,
    /// Penalised mean log-likelihood after each accepted Newton step,
    /// starting from the zero model.
    pub objective: Vec<f64>,
}

/// Penalised mean log-likelihood `(1/n) sum log p(y|x) - (alpha/2)||w||^2`.
pub fn logistic_objective(model: &LinearModel, x: &DMatrix<f64>, y: &[f64], alpha: f64) -> f64 {
    let z = model.decision(x);
    let ll: f64 = z.iter().zip(y).map(|(z, t)| t * z - softplus(*z)).sum::<f64>() / y.len() as f64;
    ll - 0.5 * alpha * model.coef.iter().map(|w| w * w).sum::<f64>()
}

/// Damped Newton ascent on [`logistic_objective`]; the intercept is not
/// penalised. Each step is halved until the objective does not decrease.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], alpha: f64, max_iter: usize, tol: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    // design with a trailing column of ones for the intercept
    let mut design = DMatrix::from_element(n, p + 1, 1.0);
    design.view_mut((0, 0), (n, p)).copy_from(x);
    let mut model = LinearModel {
        coef: vec![0.0; p],
        intercept: 0.0,
    };
    let mut current = logistic_objective(&model, x, y, alpha);
    let mut objective = vec![current];
    for _ in 0..max_iter {
        let z = model.decision(x);
        let pi: Vec<f64> = z.iter().map(|v| sigmoid(*v)).collect();
        let resid = DVector::from_iterator(n, y.iter().zip(&pi).map(|(t, q)| (t - q) / nf));
        let mut grad = design.tr_mul(&resid);
        for j in 0..p {
            grad[j] -= alpha * model.coef[j];
        }
        if grad.amax() < tol {
            break;
        }
        let mut weighted = design.clone();
        for i in 0..n {
            let w = (pi[i] * (1.0 - pi[i])).max(1e-12) / nf;
            weighted.row_mut(i).scale_mut(w);
        }
        let mut neg_hess = design.tr_mul(&weighted);
        for j in 0..p {
            neg_hess[(j, j)] += alpha;
        }
        let (chol, _) = cholesky_with_jitter(&neg_hess)?;
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial = LinearModel {
                coef: (0..p).map(|j| model.coef[j] + t * step[j]).collect(),
                intercept: model.intercept + t * step[p],
            };
            let value = logistic_objective(&trial, x, y, alpha);
            if value >= current {
                accepted = Some((trial, value));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, value)) = accepted else { break };
        let gain = value - current;
        model = trial;
        current = value;
        objective.push(current);
        if gain.abs() < tol * (1.0 + current.abs()) {
            break;
        }
    }
    if model.coef.iter().any(|c| !c.is_finite()) || !model.intercept.is_finite() {
        return Err(Error::NonFinite("logistic coefficients".into()));
    }
    Ok(LogisticFit { model, objective })
}
