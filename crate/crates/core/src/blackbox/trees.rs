//! Bagged CART regression trees.
//!
//! Splits minimize the summed squared error of the two children over every
//! feature and every midpoint between consecutive distinct values. Ties go
//! to the lower feature index, then the lower threshold. Trees grow until a
//! node is pure, has fewer than two samples, or has no admissible split.

use rayon::prelude::*;

use super::{check_dim, check_training, Predictor, PredictorKind};
use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::rng::StreamRng;

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub n_trees: usize,
    pub seed: u64,
    /// Draw a bootstrap resample of size n per tree; when false every tree
    /// sees the training set as is.
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { n_trees: DEFAULT_TREES, seed: 0, bootstrap: true, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right }
                }
            }
        }
    }
}

struct Builder<'a> {
    x: &'a PointSet,
    y: &'a [f64],
    min_split: usize,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize]) -> Option<SplitChoice> {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        // Maximizing sum_l^2/n_l + sum_r^2/n_r minimizes the children's SSE.
        let mut best: Option<SplitChoice> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.x.dim() {
            sorted.sort_by(|&a, &b| self.x.row(a)[f].total_cmp(&self.x.row(b)[f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                left_sum += self.y[sorted[pos]];
                let lo = self.x.row(sorted[pos])[f];
                let hi = self.x.row(sorted[pos + 1])[f];
                if lo == hi {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (n - pos - 1) as f64;
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(SplitChoice { feature: f, threshold, score });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let at = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        let first = self.y[idx[0]];
        if idx.len() < self.min_split || idx.iter().all(|&i| self.y[i] == first) {
            return at;
        }
        let Some(split) = self.best_split(&idx) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x.row(i)[split.feature] <= split.threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        at
    }
}

#[derive(Debug, Clone)]
pub struct BaggedTrees {
    dim: usize,
    trees: Vec<Tree>,
    options: TreeOptions,
}

pub fn trees_fit(train_x: &PointSet, train_y: &[f64], n_trees: usize, seed: u64) -> Result<BaggedTrees> {
    trees_fit_with(train_x, train_y, TreeOptions { n_trees, seed, ..TreeOptions::default() })
}

pub fn trees_fit_with(train_x: &PointSet, train_y: &[f64], options: TreeOptions) -> Result<BaggedTrees> {
    check_training(train_x, train_y)?;
    if train_x.len() < 2 {
        return Err(Error::invalid("tree ensembles need at least 2 training rows"));
    }
    if options.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    let n = train_x.len();
    let trees = (0..options.n_trees)
        .into_par_iter()
        .map(|t| {
            let idx: Vec<usize> = if options.bootstrap {
                let mut rng = StreamRng::new(options.seed, t as u64);
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b =
                Builder { x: train_x, y: train_y, min_split: options.min_samples_split.max(2), nodes: Vec::new() };
            b.grow(idx);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(BaggedTrees { dim: train_x.dim(), trees, options })
}

impl BaggedTrees {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn options(&self) -> TreeOptions {
        self.options
    }

    /// Per-tree predictions, in tree order.
    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }
}

impl Predictor for BaggedTrees {
    fn kind(&self) -> PredictorKind {
        PredictorKind::BaggedTrees
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn predict_batch(&self, x: &PointSet) -> Result<Vec<f64>> {
        check_dim(self.dim, x.dim())?;
        let k = self.trees.len() as f64;
        Ok(x.rows().map(|r| self.tree_predictions(r).iter().sum::<f64>() / k).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_bootstrap(n_trees: usize) -> TreeOptions {
        TreeOptions { n_trees, bootstrap: false, ..TreeOptions::default() }
    }

    #[test]
    fn single_unbagged_tree_interpolates_training_targets() {
        let mut rng = StreamRng::new(3, 0);
        let x = PointSet::from_flat(2, (0..200).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = x.rows().map(|r| (5.0 * r[0]).sin() + r[1]).collect();
        let m = trees_fit_with(&x, &y, no_bootstrap(1)).unwrap();
        assert_eq!(m.predict_batch(&x).unwrap(), y);
    }

    #[test]
    fn constant_targets_give_constant_predictions() {
        let mut rng = StreamRng::new(4, 0);
        let x = PointSet::from_flat(3, (0..150).map(|_| rng.normal()).collect()).unwrap();
        let y = vec![2.5; 50];
        let m = trees_fit(&x, &y, 10, 1).unwrap();
        let q = PointSet::from_flat(3, (0..30).map(|_| 3.0 * rng.normal()).collect()).unwrap();
        assert!(m.predict_batch(&q).unwrap().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn split_ties_prefer_first_feature() {
        // both features separate the targets equally well
        let x = PointSet::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let m = trees_fit_with(&x, &[0.0, 1.0], no_bootstrap(1)).unwrap();
        match m.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 0.5);
            }
            Node::Leaf(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn identical_inputs_with_different_targets_become_a_leaf() {
        let x = PointSet::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let m = trees_fit_with(&x, &[0.0, 3.0, 6.0], no_bootstrap(1)).unwrap();
        assert_eq!(m.predict(&[1.0]).unwrap(), 3.0);
    }

    #[test]
    fn seeded_fits_are_reproducible_and_order_free() {
        let mut rng = StreamRng::new(8, 0);
        let x = PointSet::from_flat(2, (0..120).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = x.rows().map(|r| r[0] * r[0] - r[1]).collect();
        let a = trees_fit(&x, &y, 25, 9).unwrap();
        let b = trees_fit(&x, &y, 25, 9).unwrap();
        let q = [0.3, 0.7];
        assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
        let mut per_tree = a.tree_predictions(&q);
        StreamRng::new(1, 1).shuffle(&mut per_tree);
        let shuffled = per_tree.iter().sum::<f64>() / 25.0;
        assert!((shuffled - a.predict(&q).unwrap()).abs() < 1e-12);
        let batch = a.predict_batch(&x).unwrap();
        for (i, r) in x.rows().enumerate() {
            assert_eq!(batch[i], a.predict(r).unwrap());
        }
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let x = PointSet::from_rows(&[[1.0]]).unwrap();
        assert!(trees_fit(&x, &[1.0], 3, 0).is_err());
        let x = PointSet::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(trees_fit(&x, &[1.0, 2.0], 0, 0).is_err());
    }
}
