//! Exact greedy decision trees shared by the forest and boosting learners.
//!
//! Samples are addressed by position in a `rows` list (a bootstrap sample may
//! repeat a row). Each feature keeps the sample positions sorted by value, and
//! every node owns the same contiguous range in each of those orderings, so a
//! split is a stable partition of the range rather than a fresh sort.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// Squared-error reduction; `a` holds targets.
    Variance,
    /// Gini reduction with 0/1 targets in `a`.
    Gini,
    /// Second-order boosting gain; `a` gradients, `b` hessians.
    Newton { lambda: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub min_child_weight: f64,
    /// Features examined per node before falling back to the rest.
    pub max_features: usize,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if x[(row, node.feature as usize)] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    a: f64,
    b: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, a: f64, b: f64) {
        self.a += a;
        self.b += b;
        self.n += 1;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            a: self.a - o.a,
            b: self.b - o.b,
            n: self.n - o.n,
        }
    }
}

struct Ctx<'a> {
    x: &'a DMatrix<f64>,
    rows: &'a [usize],
    a: &'a [f64],
    b: &'a [f64],
    p: TreeParams,
}

impl Ctx<'_> {
    fn score(&self, s: &Stats) -> f64 {
        match self.p.criterion {
            Criterion::Variance => s.a * s.a / s.n as f64,
            Criterion::Gini => {
                let n = s.n as f64;
                let z = n - s.a;
                (s.a * s.a + z * z) / n
            }
            Criterion::Newton { lambda } => 0.5 * s.a * s.a / (s.b + lambda),
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        match self.p.criterion {
            Criterion::Variance | Criterion::Gini => s.a / s.n as f64,
            Criterion::Newton { lambda } => -s.a / (s.b + lambda),
        }
    }

    fn weight(&self, s: &Stats) -> f64 {
        match self.p.criterion {
            Criterion::Newton { .. } => s.b,
            _ => s.n as f64,
        }
    }

    fn b_of(&self, s: usize) -> f64 {
        if self.b.is_empty() {
            0.0
        } else {
            self.b[s]
        }
    }

    fn value(&self, s: u32, f: usize) -> f64 {
        self.x[(self.rows[s as usize], f)]
    }

    fn is_pure(&self, order: &[u32], s: &Stats) -> bool {
        match self.p.criterion {
            Criterion::Variance => {
                let first = self.a[order[0] as usize];
                order.iter().all(|&i| self.a[i as usize] == first)
            }
            Criterion::Gini => s.a == 0.0 || s.a == s.n as f64,
            Criterion::Newton { .. } => false,
        }
    }

    fn valid_child(&self, s: &Stats) -> bool {
        s.n >= self.p.min_leaf && self.weight(s) >= self.p.min_child_weight
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Best split of one feature over the node's sorted range, if any.
fn best_split_for_feature(ctx: &Ctx, order: &[u32], f: usize, total: &Stats, tol: f64) -> Option<Split> {
    let parent = ctx.score(total);
    let mut left = Stats::default();
    let mut best: Option<Split> = None;
    for k in 0..order.len() - 1 {
        let s = order[k];
        left.add(ctx.a[s as usize], ctx.b_of(s as usize));
        let lo = ctx.value(s, f);
        let hi = ctx.value(order[k + 1], f);
        if !(lo < hi) {
            continue;
        }
        let right = total.minus(&left);
        if !ctx.valid_child(&left) || !ctx.valid_child(&right) {
            continue;
        }
        let gain = ctx.score(&left) + ctx.score(&right) - parent;
        let bar = best.as_ref().map_or(tol, |b| b.gain + tol);
        if gain > bar {
            let mut threshold = lo + (hi - lo) / 2.0;
            if !(threshold < hi) {
                threshold = lo;
            }
            best = Some(Split {
                feature: f,
                threshold,
                gain,
            });
        }
    }
    best
}

/// Grows one tree over the samples `rows` (positions into `x`), with
/// per-sample targets `a` and, for the Newton criterion, hessians `b`.
/// Returns the tree and the total split gain credited to each feature.
pub(crate) fn build_tree(
    x: &DMatrix<f64>,
    rows: &[usize],
    a: &[f64],
    b: &[f64],
    params: TreeParams,
    rng: &mut ChaCha8Rng,
) -> (Tree, Vec<f64>) {
    let m = rows.len();
    let p = x.ncols();
    assert!(m > 0 && a.len() == m);
    let ctx = Ctx { x, rows, a, b, p: params };

    // order[f * m .. (f + 1) * m] holds sample positions sorted by feature f
    let mut order: Vec<u32> = Vec::with_capacity(p * m);
    for f in 0..p {
        let mut idx: Vec<u32> = (0..m as u32).collect();
        idx.sort_by(|&i, &j| ctx.value(i, f).total_cmp(&ctx.value(j, f)));
        order.extend_from_slice(&idx);
    }
    let mut scratch: Vec<u32> = vec![0; m];
    let mut goes_left: Vec<bool> = vec![false; m];
    let mut features: Vec<usize> = (0..p).collect();
    let mut importance = vec![0.0; p];

    let mut nodes: Vec<Node> = vec![placeholder()];
    let mut stack = vec![(0usize, 0usize, m, 0usize)];
    while let Some((id, start, end, depth)) = stack.pop() {
        let mut total = Stats::default();
        for &s in &order[start..end] {
            total.add(a[s as usize], ctx.b_of(s as usize));
        }
        nodes[id].value = ctx.leaf_value(&total);
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || end - start < 2 || ctx.is_pure(&order[start..end], &total) {
            continue;
        }
        let tol = 1e-10 * ctx.score(&total).abs() + 1e-300;

        // partial Fisher-Yates: the first `max_features` entries are the draw,
        // the remainder is consulted only when the draw yields no split
        for i in 0..p {
            let j = rng.random_range(i..p);
            features.swap(i, j);
        }
        let mut best: Option<Split> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= params.max_features && best.is_some() {
                break;
            }
            let range = &order[f * m + start..f * m + end];
            if let Some(s) = best_split_for_feature(&ctx, range, f, &total, tol) {
                let beats = best.as_ref().is_none_or(|b| s.gain > b.gain + tol);
                if beats {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { continue };

        let sorted = &order[split.feature * m + start..split.feature * m + end];
        let mut n_left = 0;
        for &s in sorted {
            let l = ctx.value(s, split.feature) <= split.threshold;
            goes_left[s as usize] = l;
            n_left += l as usize;
        }
        for f in 0..p {
            let block = &mut order[f * m + start..f * m + end];
            let (mut li, mut ri) = (0, n_left);
            for &s in block.iter() {
                if goes_left[s as usize] {
                    scratch[li] = s;
                    li += 1;
                } else {
                    scratch[ri] = s;
                    ri += 1;
                }
            }
            block.copy_from_slice(&scratch[..end - start]);
        }
        importance[split.feature] += split.gain;
        let left_id = nodes.len();
        nodes.push(placeholder());
        nodes.push(placeholder());
        let node = &mut nodes[id];
        node.feature = split.feature as u32;
        node.threshold = split.threshold;
        node.left = left_id as u32;
        node.right = left_id as u32 + 1;
        stack.push((left_id + 1, start + n_left, end, depth + 1));
        stack.push((left_id, start, start + n_left, depth + 1));
    }
    (Tree { nodes }, importance)
}

fn placeholder() -> Node {
    Node {
        feature: LEAF,
        threshold: 0.0,
        left: 0,
        right: 0,
        value: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    fn params(criterion: Criterion) -> TreeParams {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            min_child_weight: 0.0,
            max_features: usize::MAX,
            criterion,
        }
    }

    #[test]
    fn memorises_distinct_rows() {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 31) as f64 + j as f64 * 0.5);
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let rows: Vec<usize> = (0..30).collect();
        let (tree, imp) = build_tree(&x, &rows, &y, &[], params(Criterion::Variance), &mut rng(1));
        for i in 0..30 {
            assert_eq!(tree.predict_row(&x, i), y[i]);
        }
        assert!(imp.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn single_informative_feature_gets_all_gain() {
        // feature 0 separates the classes, feature 1 is constant
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { i as f64 } else { 1.0 });
        let y: Vec<f64> = (0..20).map(|i| (i >= 10) as u8 as f64).collect();
        let rows: Vec<usize> = (0..20).collect();
        let (tree, imp) = build_tree(&x, &rows, &y, &[], params(Criterion::Gini), &mut rng(1));
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(imp[1], 0.0);
        // Gini decrease times n: 20 * 0.5 - 0
        assert!((imp[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn depth_limit_respected() {
        let x = DMatrix::from_fn(64, 1, |i, _| i as f64);
        let g: Vec<f64> = (0..64).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let h = vec![1.0; 64];
        let rows: Vec<usize> = (0..64).collect();
        let mut p = params(Criterion::Newton { lambda: 1.0 });
        p.max_depth = Some(3);
        let (tree, _) = build_tree(&x, &rows, &g, &h, p, &mut rng(2));
        assert!(tree.depth() <= 3);
    }
}
