//! Seeded synthetic datasets used by the examples, tests and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::rng::rng;
use crate::tabular::{FeatureTable, TargetColumn, Task};

fn row_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i:05}")).collect()
}

fn names(prefix: &str, p: usize) -> Vec<String> {
    (0..p).map(|j| format!("{prefix}{j}")).collect()
}

fn normal(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Friedman #1 response on `p >= 5` uniform features (the rest are noise):
/// `10 sin(pi x0 x1) + 20 (x2 - 1/2)^2 + 10 x3 + 5 x4 + noise * e`.
pub fn friedman(n: usize, p: usize, noise: f64, seed: u64) -> Result<(FeatureTable, TargetColumn)> {
    assert!(p >= 5, "the Friedman response reads five features");
    let mut r = rng(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.random::<f64>());
    let y: Vec<f64> = (0..n)
        .map(|i| {
            10.0 * (std::f64::consts::PI * x[(i, 0)] * x[(i, 1)]).sin()
                + 20.0 * (x[(i, 2)] - 0.5).powi(2)
                + 10.0 * x[(i, 3)]
                + 5.0 * x[(i, 4)]
                + noise * normal(&mut r)
        })
        .collect();
    let table = FeatureTable::new(row_ids(n), names("f_", p), x)?;
    Ok((table, TargetColumn::from_dense("y", Task::Regression, &y)?))
}

/// Two Gaussian blobs in the first `informative` dimensions, centred at
/// `+-separation/2` along each, plus `nuisance` pure-noise columns.
pub fn two_blobs(
    n: usize,
    informative: usize,
    nuisance: usize,
    separation: f64,
    seed: u64,
) -> Result<(FeatureTable, TargetColumn)> {
    let mut r = rng(seed);
    let p = informative + nuisance;
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let x = DMatrix::from_fn(n, p, |i, j| {
        let shift = if j < informative {
            (labels[i] - 0.5) * separation
        } else {
            0.0
        };
        shift + normal(&mut r)
    });
    let table = FeatureTable::new(row_ids(n), names("f_", p), x)?;
    Ok((table, TargetColumn::from_dense("label", Task::Classification, &labels)?))
}

/// Regression data driven by four hidden variables `z`:
/// `y = 2 sin(2 z0) + z1 z2 + 0.5 z3^2 + 0.1 e`.
///
/// `descriptors` columns (`f_d*`) are noisy linear mixtures of `z`. When
/// `latent` is set, eight `f_mpnn_*` columns carry nonlinear transforms of `z`
/// (including the exact terms of `y`) with small noise, mimicking learned
/// features that already encode the hidden nonlinearity.
pub fn latent_uplift(n: usize, descriptors: usize, latent: bool, seed: u64) -> Result<(FeatureTable, TargetColumn)> {
    let mut r = rng(seed);
    let z = DMatrix::from_fn(n, 4, |_, _| normal(&mut r));
    let mix = DMatrix::from_fn(4, descriptors, |_, _| normal(&mut r));
    let y: Vec<f64> = (0..n)
        .map(|i| {
            2.0 * (2.0 * z[(i, 0)]).sin() + z[(i, 1)] * z[(i, 2)] + 0.5 * z[(i, 3)].powi(2) + 0.1 * normal(&mut r)
        })
        .collect();
    let mut d = &z * &mix;
    for v in d.iter_mut() {
        *v += 0.5 * normal(&mut r);
    }
    let mut cols = names("f_d", descriptors);
    let values = if latent {
        cols.extend(names("f_mpnn_", 8));
        let mut full = DMatrix::zeros(n, descriptors + 8);
        full.view_mut((0, 0), (n, descriptors)).copy_from(&d);
        for i in 0..n {
            let (z0, z1, z2, z3) = (z[(i, 0)], z[(i, 1)], z[(i, 2)], z[(i, 3)]);
            let feats = [
                (2.0 * z0).sin(),
                z1 * z2,
                z3 * z3,
                z0.cos(),
                z1,
                z2,
                z3.tanh(),
                z0 + z3,
            ];
            for (k, f) in feats.iter().enumerate() {
                full[(i, descriptors + k)] = f + 0.05 * normal(&mut r);
            }
        }
        full
    } else {
        std::mem::take(&mut d)
    };
    let table = FeatureTable::new(row_ids(n), cols, values)?;
    Ok((table, TargetColumn::from_dense("y", Task::Regression, &y)?))
}
