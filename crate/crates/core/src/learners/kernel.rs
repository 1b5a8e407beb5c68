//! Gaussian-kernel learners: kernel ridge, Gaussian-process regression and
//! classification (Laplace approximation), and RBF interpolation with a
//! linear polynomial tail.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_with_jitter, gaussian_kernel, mean_and_scale, median_pairwise_distance, sigmoid, softplus,
    squared_distances,
};
use crate::rng::rng;

fn bandwidth_or_median(x: &DMatrix<f64>, bandwidth: f64) -> f64 {
    if bandwidth > 0.0 {
        bandwidth
    } else {
        median_pairwise_distance(x)
    }
}

/// Rows kept for kernel fitting: all of them, or a seeded subsample of
/// `max_rows` in ascending order.
fn capped_rows(n: usize, max_rows: usize, seed: u64) -> Vec<usize> {
    if n <= max_rows {
        return (0..n).collect();
    }
    let mut rows = sample(&mut rng(seed), n, max_rows).into_vec();
    rows.sort_unstable();
    rows
}

/// Posterior mean of a zero-mean Gaussian-kernel regressor on standardised
/// targets; kernel ridge and GP regression share this form and differ only
/// in the diagonal term and in GP reporting a predictive variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelRegressor {
    x: DMatrix<f64>,
    dual: Vec<f64>,
    bandwidth: f64,
    y_mean: f64,
    y_scale: f64,
    /// Lower Cholesky factor of `K + noise I`, kept only when variances are
    /// needed.
    factor: Option<DMatrix<f64>>,
    noise: f64,
}

impl KernelRegressor {
    pub(crate) fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        diag: f64,
        bandwidth: f64,
        keep_factor: bool,
    ) -> Result<Self> {
        let (y_mean, y_scale) = mean_and_scale(y);
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
        let bandwidth = bandwidth_or_median(x, bandwidth);
        let mut k = gaussian_kernel(&squared_distances(x, x), bandwidth);
        for i in 0..k.nrows() {
            k[(i, i)] += diag;
        }
        let (chol, _) = cholesky_with_jitter(&k)?;
        let dual = chol.solve(&ys);
        if dual.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel dual coefficients".into()));
        }
        Ok(KernelRegressor {
            x: x.clone(),
            dual: dual.iter().copied().collect(),
            bandwidth,
            y_mean,
            y_scale,
            factor: keep_factor.then(|| chol.l()),
            noise: diag,
        })
    }

    fn cross_kernel(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        gaussian_kernel(&squared_distances(q, &self.x), self.bandwidth)
    }

    pub fn predict(&self, q: &DMatrix<f64>) -> Vec<f64> {
        let ks = self.cross_kernel(q);
        let f = ks * DVector::from_column_slice(&self.dual);
        f.iter().map(|v| v * self.y_scale + self.y_mean).collect()
    }

    /// Latent predictive variance in standardised target units (excludes the
    /// noise term). `None` when the factor was not kept.
    pub fn predict_variance(&self, q: &DMatrix<f64>) -> Option<Vec<f64>> {
        let l = self.factor.as_ref()?;
        let ks = self.cross_kernel(q).transpose();
        let v = l.solve_lower_triangular(&ks)?;
        Some(v.column_iter().map(|c| (1.0 - c.norm_squared()).max(0.0)).collect())
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }
}

pub(crate) fn fit_gp_regression(
    x: &DMatrix<f64>,
    y: &[f64],
    noise: f64,
    bandwidth: f64,
    max_rows: usize,
    seed: u64,
) -> Result<KernelRegressor> {
    let rows = capped_rows(x.nrows(), max_rows, seed);
    let xs = x.select_rows(&rows);
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    KernelRegressor::fit(&xs, &ys, noise, bandwidth, true)
}

/// Gaussian RBF interpolant `s(x) = sum w_i k(x, x_i) + c0 + c'x` with the
/// side condition `P'w = 0`, solved through the Schur complement of
/// `K + smoothing I`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfInterpolator {
    x: DMatrix<f64>,
    weights: Vec<f64>,
    poly: Vec<f64>,
    bandwidth: f64,
    y_mean: f64,
    y_scale: f64,
}

impl RbfInterpolator {
    pub(crate) fn fit(x: &DMatrix<f64>, y: &[f64], smoothing: f64, bandwidth: f64) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if n < p + 2 {
            return Err(Error::TooFewRows { needed: p + 2, got: n });
        }
        let (y_mean, y_scale) = mean_and_scale(y);
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let bandwidth = bandwidth_or_median(x, bandwidth);
        let mut a = gaussian_kernel(&squared_distances(x, x), bandwidth);
        for i in 0..n {
            a[(i, i)] += smoothing;
        }
        let mut poly = DMatrix::from_element(n, p + 1, 1.0);
        poly.view_mut((0, 1), (n, p)).copy_from(x);
        let (chol, _) = cholesky_with_jitter(&a)?;
        let a_inv_p = chol.solve(&poly);
        let a_inv_y = chol.solve(&ys);
        let schur = poly.tr_mul(&a_inv_p);
        let c = schur
            .lu()
            .solve(&poly.tr_mul(&a_inv_y))
            .ok_or_else(|| Error::Singular("RBF polynomial block (collinear inputs)".into()))?;
        let w = a_inv_y - a_inv_p * &c;
        if w.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RBF coefficients".into()));
        }
        Ok(RbfInterpolator {
            x: x.clone(),
            weights: w.iter().copied().collect(),
            poly: c.iter().copied().collect(),
            bandwidth,
            y_mean,
            y_scale,
        })
    }

    pub fn predict(&self, q: &DMatrix<f64>) -> Vec<f64> {
        let ks = gaussian_kernel(&squared_distances(q, &self.x), self.bandwidth);
        let f = ks * DVector::from_column_slice(&self.weights);
        (0..q.nrows())
            .map(|i| {
                let tail = self.poly[0] + (0..q.ncols()).map(|j| self.poly[j + 1] * q[(i, j)]).sum::<f64>();
                (f[i] + tail) * self.y_scale + self.y_mean
            })
            .collect()
    }
}

/// Binary GP classifier with a logistic likelihood, fitted by Newton
/// iterations on the Laplace objective and predicting the probit-approximated
/// averaged probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpClassifier {
    x: DMatrix<f64>,
    /// `t - pi` at the mode; the predictive mean is `k*' (t - pi)`.
    resid: Vec<f64>,
    /// `W^1/2 (I + W^1/2 K W^1/2)^-1 W^1/2` at the mode; the latent variance
    /// is `1 - k*' M k*`.
    precision: DMatrix<f64>,
    bandwidth: f64,
}

/// Diagnostics of the Laplace mode search.
#[derive(Debug, Clone)]
pub struct LaplaceTrace {
    /// Objective `-a'f/2 + sum log p(y|f)` after each iteration, starting at f = 0.
    pub objective: Vec<f64>,
    /// Euclidean norm of the objective gradient at the returned mode.
    pub gradient_norm: f64,
}

struct ModeState {
    f: DVector<f64>,
    a: DVector<f64>,
    psi: f64,
}

fn laplace_psi(a: &DVector<f64>, f: &DVector<f64>, t: &[f64]) -> f64 {
    let ll: f64 = f
        .iter()
        .zip(t)
        .map(|(f, t)| {
            let s = 2.0 * t - 1.0;
            -softplus(-s * f)
        })
        .sum();
    -0.5 * a.dot(f) + ll
}

impl GpClassifier {
    pub fn fit(
        x: &DMatrix<f64>,
        t: &[f64],
        bandwidth: f64,
        max_rows: usize,
        max_iter: usize,
        tol: f64,
        seed: u64,
    ) -> Result<(Self, LaplaceTrace)> {
        let rows = capped_rows(x.nrows(), max_rows, seed);
        let x = x.select_rows(&rows);
        let t: Vec<f64> = rows.iter().map(|&r| t[r]).collect();
        let n = x.nrows();
        let bandwidth = bandwidth_or_median(&x, bandwidth);
        let k = gaussian_kernel(&squared_distances(&x, &x), bandwidth);

        let pi_of = |f: &DVector<f64>| -> Vec<f64> { f.iter().map(|v| sigmoid(*v)).collect() };
        let factor_at = |pi: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
            let sw: Vec<f64> = pi.iter().map(|p| (p * (1.0 - p)).sqrt()).collect();
            let mut b = DMatrix::from_fn(n, n, |i, j| sw[i] * k[(i, j)] * sw[j]);
            for i in 0..n {
                b[(i, i)] += 1.0;
            }
            let (chol, _) = cholesky_with_jitter(&b)?;
            Ok((sw, chol.l()))
        };
        let gradient = |state: &ModeState, pi: &[f64]| -> f64 {
            (0..n).map(|i| (t[i] - pi[i] - state.a[i]).powi(2)).sum::<f64>().sqrt()
        };

        let zero = DVector::zeros(n);
        let mut state = ModeState {
            psi: laplace_psi(&zero, &zero, &t),
            f: zero.clone(),
            a: zero,
        };
        let mut objective = vec![state.psi];
        for _ in 0..max_iter {
            let pi = pi_of(&state.f);
            if gradient(&state, &pi) < tol {
                break;
            }
            let (sw, l) = factor_at(&pi)?;
            let b = DVector::from_fn(n, |i, _| sw[i] * sw[i] * state.f[i] + (t[i] - pi[i]));
            let kb = &k * &b;
            let rhs = DVector::from_fn(n, |i, _| sw[i] * kb[i]);
            let c = l.solve_lower_triangular(&rhs).ok_or_else(|| Error::Singular("Laplace factor".into()))?;
            let back = l
                .tr_solve_lower_triangular(&c)
                .ok_or_else(|| Error::Singular("Laplace factor".into()))?;
            let mut a_new = DVector::from_fn(n, |i, _| b[i] - sw[i] * back[i]);
            let mut f_new = &k * &a_new;
            let mut psi_new = laplace_psi(&a_new, &f_new, &t);
            // step halving keeps the objective monotone
            let mut halvings = 0;
            while psi_new < state.psi && halvings < 30 {
                a_new = (&a_new + &state.a) * 0.5;
                f_new = &k * &a_new;
                psi_new = laplace_psi(&a_new, &f_new, &t);
                halvings += 1;
            }
            if psi_new < state.psi {
                break;
            }
            let gain = psi_new - state.psi;
            state = ModeState {
                f: f_new,
                a: a_new,
                psi: psi_new,
            };
            objective.push(state.psi);
            if gain <= f64::EPSILON * state.psi.abs() && gradient(&state, &pi_of(&state.f)) < tol.max(1e-8) {
                break;
            }
        }
        if state.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Laplace mode".into()));
        }
        let pi = pi_of(&state.f);
        let gradient_norm = gradient(&state, &pi);
        let (sw, l) = factor_at(&pi)?;
        let mut precision = Cholesky::pack_dirty(l).inverse();
        for j in 0..n {
            for i in 0..n {
                precision[(i, j)] *= sw[i] * sw[j];
            }
        }
        let model = GpClassifier {
            resid: (0..n).map(|i| t[i] - pi[i]).collect(),
            x,
            precision,
            bandwidth,
        };
        Ok((model, LaplaceTrace { objective, gradient_norm }))
    }

    /// Latent mean and variance at the query rows.
    pub fn latent(&self, q: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let ks = gaussian_kernel(&squared_distances(q, &self.x), self.bandwidth);
        let mean = &ks * DVector::from_column_slice(&self.resid);
        let km = &ks * &self.precision;
        let var = (0..ks.nrows())
            .map(|i| (1.0 - km.row(i).dot(&ks.row(i))).max(0.0))
            .collect();
        (mean.iter().copied().collect(), var)
    }

    pub fn predict_proba(&self, q: &DMatrix<f64>) -> Vec<f64> {
        let (mean, var) = self.latent(q);
        mean.iter()
            .zip(&var)
            .map(|(m, v)| sigmoid(m / (1.0 + std::f64::consts::PI * v / 8.0).sqrt()))
            .collect()
    }
}
