//! Fully connected networks (plain MLP and residual) trained with Adam and
//! early stopping on a seeded holdout.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean_and_scale, sigmoid, softplus};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// `relu(... relu(x W1 + b1) ...) Wo + bo`
    Mlp,
    /// `h0 = relu(x Win + bin)`, `h <- h + relu(h Wk + bk)`, then `h Wo + bo`.
    ResNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetLoss {
    /// `(1/2m) sum (out - y)^2`
    SquaredError,
    /// Binary cross-entropy on the logit output.
    Logistic,
}

/// Weights are `in x out` matrices applied on the right of a row batch;
/// biases are `1 x out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    arch: Architecture,
    loss: NetLoss,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub holdout: f64,
}

fn add_bias(z: &mut DMatrix<f64>, b: &DMatrix<f64>) {
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[(0, j)]);
    }
}

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| v.max(0.0))
}

fn column_sums(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(1, m.ncols(), |_, j| m.column(j).sum())
}

impl Network {
    /// Hidden layers use He-normal initialisation; the output layer starts at
    /// zero.
    pub fn new(arch: Architecture, loss: NetLoss, n_in: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut fan_in = n_in;
        for &w in hidden {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive deviation");
            weights.push(DMatrix::from_fn(fan_in, w, |_, _| normal.sample(rng)));
            biases.push(DMatrix::zeros(1, w));
            fan_in = w;
        }
        weights.push(DMatrix::zeros(fan_in, 1));
        biases.push(DMatrix::zeros(1, 1));
        Network {
            arch,
            loss,
            weights,
            biases,
        }
    }

    /// MLP with `layers` hidden layers of `width` units.
    pub fn mlp(loss: NetLoss, n_in: usize, width: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::new(Architecture::Mlp, loss, n_in, &vec![width; layers], rng)
    }

    /// Residual network: input projection plus `blocks` residual blocks.
    pub fn resnet(loss: NetLoss, n_in: usize, width: usize, blocks: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::new(Architecture::ResNet, loss, n_in, &vec![width; blocks + 1], rng)
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(|m| m.len()).sum()
    }

    /// Parameters flattened layer by layer as `W` (column-major) then `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    }

    /// Pre-activations of every hidden layer and the hidden outputs, plus the
    /// network output.
    fn forward(&self, x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<f64>) {
        let hidden = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(hidden);
        let mut acts: Vec<DMatrix<f64>> = Vec::with_capacity(hidden + 1);
        acts.push(x.clone());
        for l in 0..hidden {
            let h = &acts[l];
            let mut z = h * &self.weights[l];
            add_bias(&mut z, &self.biases[l]);
            let a = relu(&z);
            let next = if self.arch == Architecture::ResNet && l > 0 { h + a } else { a };
            pre.push(z);
            acts.push(next);
        }
        let mut out = &acts[hidden] * &self.weights[hidden];
        add_bias(&mut out, &self.biases[hidden]);
        (pre, acts, out.iter().copied().collect())
    }

    /// Raw network output (regression value or logit).
    pub fn output(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.forward(x).2
    }

    pub fn loss(&self, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        batch_loss(self.loss, &self.output(x), y)
    }

    /// Mean loss on the batch and its gradient in [`Network::params`] order.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let (gw, gb, loss) = self.backward(x, y);
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in gw.iter().zip(&gb) {
            flat.extend_from_slice(w.as_slice());
            flat.extend_from_slice(b.as_slice());
        }
        (loss, flat)
    }

    fn backward(&self, x: &DMatrix<f64>, y: &[f64]) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, f64) {
        let m = x.nrows() as f64;
        let hidden = self.weights.len() - 1;
        let (pre, acts, out) = self.forward(x);
        let loss = batch_loss(self.loss, &out, y);
        let d_out = DMatrix::from_iterator(
            out.len(),
            1,
            out.iter().zip(y).map(|(o, t)| match self.loss {
                NetLoss::SquaredError => (o - t) / m,
                NetLoss::Logistic => (sigmoid(*o) - t) / m,
            }),
        );
        let mut gw = vec![DMatrix::zeros(0, 0); hidden + 1];
        let mut gb = vec![DMatrix::zeros(0, 0); hidden + 1];
        gw[hidden] = acts[hidden].tr_mul(&d_out);
        gb[hidden] = column_sums(&d_out);
        let mut dh = &d_out * self.weights[hidden].transpose();
        for l in (0..hidden).rev() {
            let mut dz = dh.clone();
            dz.zip_apply(&pre[l], |g, z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            gw[l] = acts[l].tr_mul(&dz);
            gb[l] = column_sums(&dz);
            if l > 0 {
                let through = &dz * self.weights[l].transpose();
                dh = if self.arch == Architecture::ResNet { dh + through } else { through };
            }
        }
        (gw, gb, loss)
    }

    /// Adam with minibatches; after each epoch the holdout loss is checked and
    /// the best parameters are restored at the end. Without a holdout the
    /// final parameters are kept.
    pub fn train(&mut self, x: &DMatrix<f64>, y: &[f64], params: TrainParams, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let n_hold = if n >= 10 { (params.holdout * n as f64).floor() as usize } else { 0 };
        let (hold, fit) = order.split_at(n_hold);
        let mut fit = fit.to_vec();
        let hold_x = x.select_rows(hold);
        let hold_y: Vec<f64> = hold.iter().map(|&i| y[i]).collect();

        let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
        let mut m1: Vec<DMatrix<f64>> = self.weights.iter().chain(&self.biases).map(|w| w.map(|_| 0.0)).collect();
        let mut m2 = m1.clone();
        let mut step = 0i32;
        let mut best_loss = f64::INFINITY;
        let mut best = self.params();
        let mut stale = 0;
        let mut history = Vec::new();
        let nw = self.weights.len();
        for _ in 0..params.max_epochs {
            fit.shuffle(rng);
            for batch in fit.chunks(params.batch_size) {
                let bx = x.select_rows(batch);
                let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let (gw, gb, _) = self.backward(&bx, &by);
                step += 1;
                let c1 = 1.0 - b1.powi(step);
                let c2 = 1.0 - b2.powi(step);
                let lr = params.learning_rate;
                let targets = self.weights.iter_mut().chain(self.biases.iter_mut());
                for (k, (p, g)) in targets.zip(gw.iter().chain(&gb)).enumerate() {
                    debug_assert!(k < 2 * nw);
                    for ((pv, gv), (a, b)) in p
                        .iter_mut()
                        .zip(g.iter())
                        .zip(m1[k].iter_mut().zip(m2[k].iter_mut()))
                    {
                        *a = b1 * *a + (1.0 - b1) * gv;
                        *b = b2 * *b + (1.0 - b2) * gv * gv;
                        *pv -= lr * (*a / c1) / ((*b / c2).sqrt() + eps);
                    }
                }
            }
            let monitor = if n_hold > 0 {
                self.loss(&hold_x, &hold_y)
            } else {
                let fx = x.select_rows(&fit);
                let fy: Vec<f64> = fit.iter().map(|&i| y[i]).collect();
                self.loss(&fx, &fy)
            };
            if !monitor.is_finite() {
                return Err(Error::NonFinite("network loss diverged".into()));
            }
            history.push(monitor);
            if n_hold == 0 {
                continue;
            }
            if monitor < best_loss {
                best_loss = monitor;
                best = self.params();
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
        if n_hold > 0 {
            self.set_params(&best);
        }
        Ok(history)
    }

    /// Sum of absolute first-layer weights per input.
    pub fn input_weight_mass(&self) -> Vec<f64> {
        self.weights[0].row_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect()
    }
}

fn batch_loss(loss: NetLoss, out: &[f64], y: &[f64]) -> f64 {
    let m = y.len() as f64;
    match loss {
        NetLoss::SquaredError => out.iter().zip(y).map(|(o, t)| 0.5 * (o - t) * (o - t)).sum::<f64>() / m,
        NetLoss::Logistic => out.iter().zip(y).map(|(o, t)| softplus(*o) - t * o).sum::<f64>() / m,
    }
}

/// A trained network together with the target standardisation it was
/// trained under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralModel {
    net: Network,
    y_mean: f64,
    y_scale: f64,
}

impl NeuralModel {
    pub(crate) fn fit(
        arch: Architecture,
        loss: NetLoss,
        x: &DMatrix<f64>,
        y: &[f64],
        width: usize,
        depth: usize,
        train: TrainParams,
        seed: u64,
    ) -> Result<Self> {
        let mut r = rng(seed);
        let (y_mean, y_scale) = match loss {
            NetLoss::SquaredError => mean_and_scale(y),
            NetLoss::Logistic => (0.0, 1.0),
        };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let mut net = match arch {
            Architecture::Mlp => Network::mlp(loss, x.ncols(), width, depth, &mut r),
            Architecture::ResNet => Network::resnet(loss, x.ncols(), width, depth, &mut r),
        };
        net.train(x, &ys, train, &mut r)?;
        Ok(NeuralModel { net, y_mean, y_scale })
    }

    /// Regression values, or class-1 probabilities for the logistic loss.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let out = self.net.output(x);
        match self.net.loss {
            NetLoss::SquaredError => out.into_iter().map(|o| o * self.y_scale + self.y_mean).collect(),
            NetLoss::Logistic => out.into_iter().map(sigmoid).collect(),
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn check_gradient(arch: Architecture, loss: NetLoss) {
        let mut r = rng(5);
        let mut net = Network::new(arch, loss, 3, &[4, 4], &mut r);
        let flat: Vec<f64> = (0..net.n_params()).map(|_| r.random_range(-0.8..0.8)).collect();
        net.set_params(&flat);
        let x = DMatrix::from_fn(6, 3, |_, _| r.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..6)
            .map(|i| match loss {
                NetLoss::SquaredError => x[(i, 0)] - x[(i, 2)],
                NetLoss::Logistic => (i % 2) as f64,
            })
            .collect();
        let (_, grad) = net.loss_and_gradient(&x, &y);
        let h = 1e-6;
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += h;
            net.set_params(&p);
            let up = net.loss(&x, &y);
            p[k] -= 2.0 * h;
            net.set_params(&p);
            let down = net.loss(&x, &y);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradient(Architecture::Mlp, NetLoss::SquaredError);
        check_gradient(Architecture::Mlp, NetLoss::Logistic);
        check_gradient(Architecture::ResNet, NetLoss::SquaredError);
        check_gradient(Architecture::ResNet, NetLoss::Logistic);
    }

    #[test]
    fn learns_a_linear_map() {
        let x = DMatrix::from_fn(200, 2, |i, j| ((i * (j + 3)) % 23) as f64 / 11.0 - 1.0);
        let y: Vec<f64> = (0..200).map(|i| 2.0 * x[(i, 0)] - x[(i, 1)]).collect();
        let train = TrainParams {
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            learning_rate: 1e-2,
            holdout: 0.1,
        };
        let m = NeuralModel::fit(Architecture::Mlp, NetLoss::SquaredError, &x, &y, 16, 1, train, 1).unwrap();
        let pred = m.predict(&x);
        let mse = pred.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / 200.0;
        assert!(mse < 0.05, "mse {mse}");
    }
}
