//! Histogram-based multiclass gradient boosting with softmax loss.
//!
//! Each round fits one depth-limited regression tree per class on the
//! second-order expansion of the cross-entropy (gradient `p - y`, hessian
//! `p(1-p)`). Split candidates are quantile bin boundaries computed once on
//! the training set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2_reg: f64,
    /// Fraction of rows sampled (without replacement) per round.
    pub subsample: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            n_bins: 32,
            min_samples_leaf: 5,
            l2_reg: 1.0,
            subsample: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 || self.max_depth == 0 {
            return Err(Error::validation("n_rounds and max_depth must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::validation("n_bins must lie in [2, 256]"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::validation("subsample must lie in (0, 1]"));
        }
        if !(self.l2_reg >= 0.0) {
            return Err(Error::validation("l2_reg must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Trained ensemble: `trees[round][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Booster {
    pub n_features: usize,
    pub n_classes: usize,
    pub init_scores: Vec<f64>,
    pub trees: Vec<Vec<Tree>>,
}

impl Booster {
    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = self.init_scores.clone();
        for round in &self.trees {
            for (s, tree) in scores.iter_mut().zip(round) {
                *s += tree.predict(x);
            }
        }
        scores
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.raw_scores(x))
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-major training matrix.
pub struct TrainingSet<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

/// Fits a booster. Every class in `0..n_classes` must be present.
pub fn fit(data: &TrainingSet<'_>, hp: &Hyperparams, seed: u64) -> Result<Booster> {
    hp.validate()?;
    let n = data.rows.len();
    if n == 0 || data.labels.len() != n {
        return Err(Error::Training("empty or misaligned training data".into()));
    }
    let n_features = data.rows[0].len();
    if n_features == 0 || data.rows.iter().any(|r| r.len() != n_features) {
        return Err(Error::Training("rows must share a non-zero width".into()));
    }
    if data.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let k = data.n_classes;
    let mut class_counts = vec![0usize; k];
    for &y in data.labels {
        if y >= k {
            return Err(Error::Training(format!("label {y} out of range")));
        }
        class_counts[y] += 1;
    }
    if let Some(missing) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::Training(format!(
            "class {missing} absent from training data"
        )));
    }

    let binned = BinnedMatrix::new(data.rows, hp.n_bins);
    let init_scores: Vec<f64> = class_counts
        .iter()
        .map(|&c| (c as f64 / n as f64).ln())
        .collect();
    let mut scores: Vec<f64> = (0..n).flat_map(|_| init_scores.iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_rows: Vec<usize> = (0..n).collect();
    let sample_size = ((n as f64 * hp.subsample).round() as usize).clamp(1, n);

    let mut trees = Vec::with_capacity(hp.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..hp.n_rounds {
        let sample: Vec<usize> = if sample_size < n {
            all_rows.shuffle(&mut rng);
            let mut s = all_rows[..sample_size].to_vec();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        let probs: Vec<Vec<f64>> = (0..n).map(|i| softmax(&scores[i * k..(i + 1) * k])).collect();
        let mut round = Vec::with_capacity(k);
        for class in 0..k {
            for i in 0..n {
                let p = probs[i][class];
                let y = if data.labels[i] == class { 1.0 } else { 0.0 };
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(1e-6);
            }
            let tree = TreeBuilder {
                binned: &binned,
                grad: &grad,
                hess: &hess,
                hp,
            }
            .build(sample.clone());
            for i in 0..n {
                scores[i * k + class] += tree.predict(&data.rows[i]);
            }
            round.push(tree);
        }
        trees.push(round);
    }

    Ok(Booster {
        n_features,
        n_classes: k,
        init_scores,
        trees,
    })
}

/// Column-major bin indices plus the split threshold of every bin boundary.
struct BinnedMatrix {
    n_rows: usize,
    /// `bins[f * n_rows + i]`
    bins: Vec<u8>,
    /// `thresholds[f][b]`: values `<= thresholds[f][b]` fall in bins `0..=b`.
    thresholds: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    fn new(rows: &[Vec<f64>], n_bins: usize) -> Self {
        let n_rows = rows.len();
        let n_features = rows[0].len();
        let mut bins = vec![0u8; n_rows * n_features];
        let mut thresholds = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            col.sort_by(f64::total_cmp);
            let edges = bin_edges(&col, n_bins);
            for (i, r) in rows.iter().enumerate() {
                bins[f * n_rows + i] = edges.partition_point(|&t| t < r[f]) as u8;
            }
            thresholds.push(edges);
        }
        Self {
            n_rows,
            bins,
            thresholds,
        }
    }

    fn n_features(&self) -> usize {
        self.thresholds.len()
    }
}

/// Split thresholds for one sorted column: midpoints between distinct
/// values when there are few of them, otherwise quantile cut points.
fn bin_edges(sorted: &[f64], n_bins: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..n_bins).map(|b| sorted[b * n / n_bins - 1]).collect();
    edges.dedup();
    if edges.last() == sorted.last() {
        edges.pop();
    }
    edges
}

struct TreeBuilder<'a> {
    binned: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    hp: &'a Hyperparams,
}

#[derive(Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: usize,
}

struct SplitChoice {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.grow(rows, 0, &mut nodes);
        Tree { nodes }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.hp.l2_reg) * self.hp.learning_rate
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let idx = nodes.len();
        let (g, h) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));
        nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.hp.max_depth || rows.len() < 2 * self.hp.min_samples_leaf {
            return idx;
        }
        let Some(split) = self.best_split(&rows, g, h) else {
            return idx;
        };
        let n_rows = self.binned.n_rows;
        let col = &self.binned.bins[split.feature * n_rows..(split.feature + 1) * n_rows];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| (col[i] as usize) <= split.bin);
        let left = self.grow(left_rows, depth + 1, nodes);
        let right = self.grow(right_rows, depth + 1, nodes);
        nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: self.binned.thresholds[split.feature][split.bin],
            left,
            right,
        };
        idx
    }

    fn best_split(&self, rows: &[usize], g_total: f64, h_total: f64) -> Option<SplitChoice> {
        let lambda = self.hp.l2_reg;
        let parent = g_total * g_total / (h_total + lambda);
        let n_rows = self.binned.n_rows;
        let min_leaf = self.hp.min_samples_leaf.max(1);
        let mut best: Option<SplitChoice> = None;
        let mut hist = Vec::new();
        for f in 0..self.binned.n_features() {
            let n_edges = self.binned.thresholds[f].len();
            if n_edges == 0 {
                continue;
            }
            hist.clear();
            hist.resize(n_edges + 1, Bucket::default());
            let col = &self.binned.bins[f * n_rows..(f + 1) * n_rows];
            for &i in rows {
                let b = &mut hist[col[i] as usize];
                b.g += self.grad[i];
                b.h += self.hess[i];
                b.n += 1;
            }
            let mut left = Bucket::default();
            for (bin, bucket) in hist.iter().take(n_edges).enumerate() {
                left.g += bucket.g;
                left.h += bucket.h;
                left.n += bucket.n;
                let right_n = rows.len() - left.n;
                if left.n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let gr = g_total - left.g;
                let hr = h_total - left.h;
                let gain = left.g * left.g / (left.h + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice {
                        feature: f,
                        bin,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_two_class_problem_fits_quickly() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i >= 100)).collect();
        let hp = Hyperparams {
            n_rounds: 10,
            ..Hyperparams::default()
        };
        let model = fit(
            &TrainingSet {
                rows: &rows,
                labels: &labels,
                n_classes: 2,
            },
            &hp,
            1,
        )
        .unwrap();
        for (x, &y) in rows.iter().zip(&labels) {
            let p = model.predict_proba(x);
            let pred = if p[1] > p[0] { 1 } else { 0 };
            assert_eq!(pred, y);
        }
    }

    #[test]
    fn missing_class_is_an_error() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let labels = vec![0usize; 50];
        let err = fit(
            &TrainingSet {
                rows: &rows,
                labels: &labels,
                n_classes: 4,
            },
            &Hyperparams::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn bin_edges_cover_small_and_large_columns() {
        assert_eq!(bin_edges(&[1.0, 1.0, 2.0, 4.0], 32), vec![1.5, 3.0]);
        let col: Vec<f64> = (0..1000).map(f64::from).collect();
        let edges = bin_edges(&col, 32);
        assert_eq!(edges.len(), 31);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn training_is_deterministic_with_subsampling() {
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|i| vec![(i % 17) as f64, (i * 7 % 23) as f64])
            .collect();
        let labels: Vec<usize> = (0..300).map(|i| (i % 17 + i * 7 % 23) % 3).collect();
        let hp = Hyperparams {
            n_rounds: 15,
            subsample: 0.7,
            ..Hyperparams::default()
        };
        let set = TrainingSet {
            rows: &rows,
            labels: &labels,
            n_classes: 3,
        };
        let a = fit(&set, &hp, 9).unwrap();
        let b = fit(&set, &hp, 9).unwrap();
        assert_eq!(a, b);
    }
}
