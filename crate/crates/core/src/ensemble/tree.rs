use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_first, EnsembleConfig, Variant};
use crate::seed;

/// Flat node array; node 0 is the root and children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class-count histogram of the training samples that reached the leaf.
    Leaf { leaf: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { leaf } => return argmax_first(leaf),
            }
        }
    }

    /// Structural validation for trees loaded from disk.
    pub(crate) fn check(&self, n_classes: usize, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err(format!("node {i} has invalid feature or threshold"));
                    }
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(format!("node {i} has out-of-order children"));
                    }
                }
                Node::Leaf { leaf } if leaf.len() != n_classes => {
                    return Err(format!("leaf {i} has {} classes, expected {n_classes}", leaf.len()));
                }
                Node::Leaf { .. } => {}
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn check_thresholds(&self, node: usize, rows: &[&[f64]]) {
        if let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[node]
        {
            let lo = rows.iter().map(|r| r[*feature]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[*feature]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= *threshold && *threshold <= hi, "threshold {threshold} outside [{lo}, {hi}]");
            let (l, r): (Vec<&[f64]>, Vec<&[f64]>) = rows.iter().partition(|x| x[*feature] <= *threshold);
            self.check_thresholds(*left, &l);
            self.check_thresholds(*right, &r);
        }
    }
}

pub(crate) struct TrainingData<'a> {
    pub x: &'a [&'a [f64]],
    pub y: &'a [usize],
    pub n_classes: usize,
    pub max_features: usize,
}

/// Weighted Gini impurity of a two-way partition.
pub fn split_impurity(left: &[u32], right: &[u32]) -> f64 {
    let gini_mass = |c: &[u32]| {
        let n: u32 = c.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n = f64::from(n);
        n * (1.0 - c.iter().map(|&k| (f64::from(k) / n).powi(2)).sum::<f64>())
    };
    let total: u32 = left.iter().chain(right).sum();
    (gini_mass(left) + gini_mass(right)) / f64::from(total)
}

/// Impurity gains smaller than this are treated as ties, so the earlier
/// candidate wins regardless of rounding in the last bits.
const TIE_EPS: f64 = 1e-12;

/// A candidate split of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub impurity: f64,
}

/// Best Gini split of one feature over midpoints between consecutive
/// distinct values. The lowest threshold wins ties.
pub fn best_gini_split(values: &[f64], classes: &[usize], n_classes: usize) -> Option<SplitCandidate> {
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(classes.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut left = vec![0u32; n_classes];
    let mut right = vec![0u32; n_classes];
    for &(_, c) in &pairs {
        right[c] += 1;
    }
    let mut best: Option<SplitCandidate> = None;
    for i in 0..pairs.len().saturating_sub(1) {
        let c = pairs[i].1;
        left[c] += 1;
        right[c] -= 1;
        let (a, b) = (pairs[i].0, pairs[i + 1].0);
        if a == b {
            continue;
        }
        let impurity = split_impurity(&left, &right);
        if best.is_none_or(|s| impurity < s.impurity - TIE_EPS) {
            best = Some(SplitCandidate {
                threshold: midpoint(a, b),
                impurity,
            });
        }
    }
    best
}

/// A value in `[a, b)` halfway between them where representable.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// The bootstrap sample a Random Forest tree with this seed trains on.
#[cfg(test)]
pub(crate) fn bootstrap_indices(n: usize, tree_seed: u64) -> Vec<usize> {
    draw_bootstrap(n, &mut seed::rng(tree_seed))
}

fn draw_bootstrap(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub(crate) fn grow(data: &TrainingData<'_>, cfg: &EnsembleConfig, tree_seed: u64) -> Tree {
    let mut rng = seed::rng(tree_seed);
    let n = data.y.len();
    let samples = match cfg.variant {
        Variant::RandomForest => draw_bootstrap(n, &mut rng),
        Variant::ExtraTrees => (0..n).collect(),
    };
    let mut builder = Builder {
        data,
        cfg,
        rng,
        nodes: Vec::new(),
    };
    builder.build(samples, 0);
    Tree { nodes: builder.nodes }
}

struct Builder<'a, 'd> {
    data: &'a TrainingData<'d>,
    cfg: &'a EnsembleConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_, '_> {
    fn histogram(&self, samples: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.data.n_classes];
        for &s in samples {
            counts[self.data.y[s]] += 1;
        }
        counts
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let idx = self.nodes.len();
        let counts = self.histogram(&samples);
        self.nodes.push(Node::Leaf { leaf: counts.clone() });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let too_small = samples.len() < self.cfg.min_samples_split;
        let too_deep = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || too_small || too_deep {
            return idx;
        }
        let Some((feature, threshold)) = self.find_split(&samples) else {
            return idx;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.data.x[s][feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[idx] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        idx
    }

    /// Visits features in random order until `max_features` non-constant ones
    /// have been tried; constant features do not count.
    fn find_split(&mut self, samples: &[usize]) -> Option<(usize, f64)> {
        let dim = self.data.x[samples[0]].len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.shuffle(&mut self.rng);
        let mut tried = 0;
        let mut best: Option<(usize, SplitCandidate)> = None;
        for f in order {
            if tried == self.data.max_features {
                break;
            }
            let values: Vec<f64> = samples.iter().map(|&s| self.data.x[s][f]).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo >= hi {
                continue;
            }
            tried += 1;
            let candidate = match self.cfg.variant {
                Variant::RandomForest => {
                    let classes: Vec<usize> = samples.iter().map(|&s| self.data.y[s]).collect();
                    best_gini_split(&values, &classes, self.data.n_classes)
                }
                Variant::ExtraTrees => {
                    let threshold = self.rng.gen_range(lo..hi);
                    let mut left = vec![0u32; self.data.n_classes];
                    let mut right = vec![0u32; self.data.n_classes];
                    for (&s, &v) in samples.iter().zip(&values) {
                        if v <= threshold {
                            left[self.data.y[s]] += 1;
                        } else {
                            right[self.data.y[s]] += 1;
                        }
                    }
                    Some(SplitCandidate {
                        threshold,
                        impurity: split_impurity(&left, &right),
                    })
                }
            };
            if let Some(c) = candidate {
                if best.is_none_or(|(_, b)| c.impurity < b.impurity - TIE_EPS) {
                    best = Some((f, c));
                }
            }
        }
        best.map(|(f, c)| (f, c.threshold))
    }
}
