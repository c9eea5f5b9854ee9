//! CART trees: Gini classification trees and Newton-leaf regression trees
//! for gradient boosting.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::nn::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

/// What the tree fits.
pub enum Target<'a> {
    /// 0/1 labels; Gini splits; leaf = fraction of 1s.
    Classify(&'a [f64]),
    /// Gradient/hessian pairs; squared-error splits on the gradient;
    /// leaf = Σg / Σh.
    Newton { grad: &'a [f64], hess: &'a [f64] },
}

impl Target<'_> {
    fn y(&self, i: usize) -> f64 {
        match self {
            Target::Classify(y) => y[i],
            Target::Newton { grad, .. } => grad[i],
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        match self {
            Target::Classify(y) => rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64,
            Target::Newton { grad, hess } => {
                let g: f64 = rows.iter().map(|&i| grad[i]).sum();
                let h: f64 = rows.iter().map(|&i| hess[i]).sum();
                if h > 1e-12 {
                    g / h
                } else {
                    0.0
                }
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y(rows[0]);
        rows.iter().all(|&i| self.y(i) == first)
    }

    /// Impurity-weighted cost of a node given (count, sum of y, sum of y²).
    fn cost(&self, n: f64, sum: f64, sum_sq: f64) -> f64 {
        match self {
            // n · Gini = n · 2p(1-p)
            Target::Classify(_) => 2.0 * sum * (n - sum) / n,
            Target::Newton { .. } => sum_sq - sum * sum / n,
        }
    }
}

/// Builds a tree over `rows` of the row-major matrix `x` with `d` columns.
pub fn build_tree(x: &[Vec<f64>], target: &Target<'_>, rows: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow(x, target, rows, 0, params, rng, &mut tree.nodes);
    tree
}

fn grow(
    x: &[Vec<f64>],
    target: &Target<'_>,
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf {
        value: target.leaf_value(&rows),
    });
    let min_leaf = params.min_leaf.max(1);
    if depth >= params.max_depth || rows.len() < 2 * min_leaf || target.is_pure(&rows) {
        return id;
    }
    let d = x[rows[0]].len();
    let features: Vec<usize> = match params.max_features {
        Some(k) if k < d => {
            let mut f = sample(rng, d, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    };
    let Some((feature, threshold)) = best_split(x, target, &rows, &features, min_leaf) else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] <= threshold);
    let left = grow(x, target, left_rows, depth + 1, params, rng, nodes);
    let right = grow(x, target, right_rows, depth + 1, params, rng, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// Lowest-cost split at midpoints between consecutive distinct values.
/// Zero-gain splits are accepted (an impure node may need two levels, e.g. XOR).
fn best_split(
    x: &[Vec<f64>],
    target: &Target<'_>,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let (total, total_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &i| {
        let y = target.y(i);
        (s + y, q + y * y)
    });
    let parent = target.cost(n as f64, total, total_sq);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (x[i][f], target.y(i))));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut sum, mut sq) = (0.0, 0.0);
        for k in 0..n - 1 {
            sum += sorted[k].1;
            sq += sorted[k].1 * sorted[k].1;
            let n_left = k + 1;
            if sorted[k].0 == sorted[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let cost = target.cost(n_left as f64, sum, sq)
                + target.cost((n - n_left) as f64, total - sum, total_sq - sq);
            if cost <= parent + 1e-12 && best.is_none_or(|(c, _, _)| cost < c - 1e-12) {
                let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                best = Some((cost, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0.0, 1.0, 1.0, 0.0],
        )
    }

    /// Brute force: every depth-2 tree over midpoint thresholds.
    fn best_depth2_accuracy(x: &[Vec<f64>], y: &[f64]) -> f64 {
        let thresholds = [0.5];
        let mut best: f64 = 0.0;
        for f0 in 0..2 {
            for &t0 in &thresholds {
                for f1 in 0..2 {
                    for f2 in 0..2 {
                        let mut correct = 0;
                        let (mut groups, mut labels) = (vec![vec![]; 4], vec![0.0; 4]);
                        for (i, row) in x.iter().enumerate() {
                            let side = if row[f0] <= t0 { 0 } else { 2 };
                            let inner = if side == 0 { f1 } else { f2 };
                            groups[side + usize::from(row[inner] > 0.5)].push(i);
                        }
                        for (g, lab) in groups.iter().zip(labels.iter_mut()) {
                            let ones = g.iter().filter(|&&i| y[i] == 1.0).count();
                            *lab = if 2 * ones >= g.len() { 1.0 } else { 0.0 };
                            correct += g.iter().filter(|&&i| y[i] == *lab).count();
                        }
                        best = best.max(correct as f64 / y.len() as f64);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn xor_needs_two_levels() {
        let (x, y) = xor();
        assert_eq!(best_depth2_accuracy(&x, &y), 1.0);
        let params = TreeParams {
            max_depth: 2,
            min_leaf: 1,
            max_features: None,
        };
        let tree = build_tree(&x, &Target::Classify(&y), (0..4).collect(), &params, &mut Rng::new(0));
        assert_eq!(tree.depth(), 2);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(tree.predict(row), label);
        }
    }

    #[test]
    fn depth_limit_and_leaf_fraction() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect();
        let params = TreeParams {
            max_depth: 0,
            min_leaf: 1,
            max_features: None,
        };
        let tree = build_tree(&x, &Target::Classify(&y), (0..10).collect(), &params, &mut Rng::new(0));
        assert_eq!(tree.nodes.len(), 1);
        assert!((tree.predict(&[100.0]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn midpoint_thresholds() {
        let x = vec![vec![1.0], vec![3.0], vec![3.0], vec![7.0]];
        let y = vec![0.0, 0.0, 0.0, 1.0];
        let params = TreeParams {
            max_depth: 1,
            min_leaf: 1,
            max_features: None,
        };
        let tree = build_tree(&x, &Target::Classify(&y), (0..4).collect(), &params, &mut Rng::new(0));
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 5.0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn newton_leaves() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let grad = vec![-1.0, -1.0, 1.0, 1.0];
        let hess = vec![0.25; 4];
        let params = TreeParams {
            max_depth: 1,
            min_leaf: 1,
            max_features: None,
        };
        let tree = build_tree(&x, &Target::Newton { grad: &grad, hess: &hess }, (0..4).collect(), &params, &mut Rng::new(0));
        assert_eq!(tree.predict(&[0.0]), -4.0);
        assert_eq!(tree.predict(&[3.0]), 4.0);
    }
}
