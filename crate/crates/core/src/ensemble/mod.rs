//! Random Forest and Extra Trees classifiers built on Gini CART trees.
//!
//! Tree `t` draws all of its randomness from `seed::derive(&[seed, t])`, so a
//! forest is identical whether its trees are grown serially or in parallel.

mod metrics;
mod split;
mod tree;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::FeatureVector;
use crate::seed;

pub use metrics::{evaluate, ClassMetrics, MetricsReport};
pub use split::train_test_split;
pub use tree::{Node, Tree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Canonical identity used for ordering, independent of file order.
    pub id: u64,
    pub features: Vec<f64>,
    pub label: String,
}

impl Row {
    /// A row whose id is a hash of its content.
    pub fn new(features: Vec<f64>, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut parts = vec![seed::fnv1a(label.as_bytes())];
        parts.extend(features.iter().map(|f| f.to_bits()));
        Self {
            id: seed::derive(&parts),
            features,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.features.len() != first.features.len()) {
                return Err(Error::Dimension {
                    expected: first.features.len(),
                    actual: bad.features.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    /// Labelled feature vectors; unlabelled rows are rejected.
    pub fn from_features(features: &[FeatureVector]) -> Result<Self> {
        let rows = features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let label = f.label.clone().ok_or_else(|| Error::Parse(format!("feature row {i} has no label")))?;
                Ok(Row::new(f.to_array().to_vec(), label))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Rows sorted by canonical id.
    pub fn canonical(&self) -> Self {
        let mut rows = self.rows.clone();
        rows.sort_by_key(|r| r.id);
        Self { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    RandomForest,
    ExtraTrees,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random-forest" | "randomforest" => Ok(Variant::RandomForest),
            "et" | "extra-trees" | "extratrees" => Ok(Variant::ExtraTrees),
            _ => Err(Error::Config(format!("unknown variant {s:?}; expected rf or et"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least one.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((dim as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub variant: Variant,
    pub n_estimators: usize,
    pub seed: u64,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            n_estimators: 100,
            seed: 42,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            max_depth: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be >= 1".into()));
        }
        let m = self.max_features.resolve(dim);
        if m == 0 || m > dim {
            return Err(Error::Config(format!("max_features {m} outside [1, {dim}]")));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub config: EnsembleConfig,
    /// Class dictionary; leaf histograms and votes are indexed by it.
    pub labels: Vec<String>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported model version {}", model.version)));
        }
        for (t, tree) in model.trees.iter().enumerate() {
            tree.check(model.labels.len(), model.n_features)
                .map_err(|m| Error::Parse(format!("tree {t}: {m}")))?;
        }
        Ok(model)
    }

    /// Class index by plurality vote; ties go to the lowest index.
    pub fn predict_index(&self, features: &[f64]) -> Result<usize> {
        if features.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: features.len(),
            });
        }
        let mut votes = vec![0u32; self.labels.len()];
        for tree in &self.trees {
            votes[tree.predict(features)] += 1;
        }
        Ok(argmax_first(&votes))
    }

    pub fn predict(&self, features: &[f64]) -> Result<&str> {
        Ok(&self.labels[self.predict_index(features)?])
    }
}

/// Index of the largest count, lowest index on ties.
pub(crate) fn argmax_first(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Trains a forest, growing trees in parallel when the `parallel` feature is on.
pub fn fit(ds: &Dataset, cfg: &EnsembleConfig) -> Result<ForestModel> {
    fit_with(ds, cfg, cfg!(feature = "parallel"))
}

pub fn fit_with(ds: &Dataset, cfg: &EnsembleConfig, parallel: bool) -> Result<ForestModel> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot fit on an empty dataset"));
    }
    let dim = ds.dim();
    if dim == 0 {
        return Err(Error::Config("dataset has zero features".into()));
    }
    cfg.validate(dim)?;
    let labels = ds.labels();
    let x: Vec<&[f64]> = ds.rows().iter().map(|r| r.features.as_slice()).collect();
    let y: Vec<usize> = ds
        .rows()
        .iter()
        .map(|r| labels.binary_search(&r.label).expect("label in dictionary"))
        .collect();
    let data = tree::TrainingData {
        x: &x,
        y: &y,
        n_classes: labels.len(),
        max_features: cfg.max_features.resolve(dim),
    };
    let grow = |t: usize| tree::grow(&data, cfg, seed::derive(&[cfg.seed, t as u64]));

    let trees: Vec<Tree> = if parallel {
        grow_parallel(cfg.n_estimators, &grow)
    } else {
        (0..cfg.n_estimators).map(grow).collect()
    };
    Ok(ForestModel {
        version: MODEL_FORMAT_VERSION,
        config: *cfg,
        labels,
        n_features: dim,
        trees,
    })
}

#[cfg(feature = "parallel")]
fn grow_parallel<F: Fn(usize) -> Tree + Sync>(n: usize, grow: &F) -> Vec<Tree> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(grow).collect()
}

#[cfg(not(feature = "parallel"))]
fn grow_parallel<F: Fn(usize) -> Tree>(n: usize, grow: &F) -> Vec<Tree> {
    (0..n).map(grow).collect()
}
