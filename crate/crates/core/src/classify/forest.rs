//! Random forest of CART trees: bootstrap rows, random feature subsets per
//! node, Gini splits at midpoints, grown to purity.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, Classifier, LabeledDataset, Prediction};
use crate::error::{Error, Result};
use crate::ingest::FaultLabel;
use crate::rng;

const K: usize = FaultLabel::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(dim))`.
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; K],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root is node 0. Samples with `x[feature] <= threshold` go left.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32; K] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority label of the reached leaf; ties go to the lowest code.
    pub fn predict(&self, x: &[f64]) -> FaultLabel {
        majority(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

fn majority<T: PartialOrd + Copy>(counts: &[T; K]) -> FaultLabel {
    let mut best = 0;
    for c in 1..K {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    FaultLabel::ALL[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub feature_dim: usize,
    pub features_per_split: usize,
    pub seed: u64,
    /// Mean accuracy of single trees on their own out-of-bag rows.
    pub oob_score: Option<f64>,
}

struct Builder<'a> {
    x: Vec<&'a [f64]>,
    y: Vec<usize>,
    mtry: usize,
    dim: usize,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u32; K] {
        let mut c = [0u32; K];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&self, idx: Vec<usize>, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let counts = self.counts(&idx);
        let at = nodes.len();
        nodes.push(Node::Leaf { counts });
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            return at;
        }
        let Some((feature, threshold)) = self.best_split(&idx, &counts, rng) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, rng, nodes);
        let right = self.grow(r, rng, nodes);
        nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    /// Visits features in random order until `mtry` non-constant ones have
    /// been scored, so a node only becomes a leaf when no feature separates it.
    fn best_split(&self, idx: &[usize], total: &[u32; K], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.shuffle(rng);
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        let mut sorted = idx.to_vec();
        for &f in &order {
            if scored == self.mtry {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let lo = self.x[sorted[0]][f];
            let hi = self.x[*sorted.last().expect("nonempty")][f];
            if lo == hi {
                continue;
            }
            scored += 1;
            let mut left = [0u32; K];
            let mut left_sq = 0.0f64;
            let mut right = *total;
            let mut right_sq: f64 = total.iter().map(|&c| (c as f64).powi(2)).sum();
            for w in 0..sorted.len() - 1 {
                let c = self.y[sorted[w]];
                // Running sums of squared counts: (k+1)^2 - k^2 = 2k + 1.
                left_sq += 2.0 * left[c] as f64 + 1.0;
                left[c] += 1;
                right_sq -= 2.0 * right[c] as f64 - 1.0;
                right[c] -= 1;
                let (a, b) = (self.x[sorted[w]][f], self.x[sorted[w + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = (w + 1) as f64;
                let nr = n - nl;
                // n_l * gini_l + n_r * gini_r = n - sum_l c^2 / n_l - sum_r c^2 / n_r
                let impurity = n - left_sq / nl - right_sq / nr;
                if best.is_none_or(|(bi, _, _)| impurity < bi) {
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some((impurity, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

pub fn train_forest(data: &LabeledDataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    data.require_classes()?;
    let dim = data.feature_dim();
    let mtry = params
        .features_per_split
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim.max(1));
    let builder = Builder {
        x: data.rows().iter().map(|r| r.features.as_slice()).collect(),
        y: data.rows().iter().map(|r| r.label.code()).collect(),
        mtry,
        dim,
    };
    let n = data.len();

    let grown: Vec<(DecisionTree, Option<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let mut in_bag = vec![false; n];
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.gen_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let mut nodes = Vec::new();
            builder.grow(idx, &mut rng, &mut nodes);
            let tree = DecisionTree { nodes };
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            let acc = (!oob.is_empty()).then(|| {
                let hits = oob
                    .iter()
                    .filter(|&&i| tree.predict(builder.x[i]).code() == builder.y[i])
                    .count();
                hits as f64 / oob.len() as f64
            });
            (tree, acc)
        })
        .collect();

    let scores: Vec<f64> = grown.iter().filter_map(|g| g.1).collect();
    let oob_score = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    Ok(ForestModel {
        trees: grown.into_iter().map(|g| g.0).collect(),
        feature_dim: dim,
        features_per_split: mtry,
        seed,
        oob_score,
    })
}

impl ForestModel {
    pub fn votes(&self, x: &[f64]) -> Result<[u32; K]> {
        check_dim(self.feature_dim, x)?;
        let mut v = [0u32; K];
        for t in &self.trees {
            v[t.predict(x).code()] += 1;
        }
        Ok(v)
    }
}

impl Classifier for ForestModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let votes = self.votes(x)?;
        let label = majority(&votes);
        Ok(Prediction {
            label,
            confidence: votes[label.code()] as f64 / self.trees.len() as f64,
        })
    }
}
