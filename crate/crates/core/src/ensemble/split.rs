use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{Dataset, Row};
use crate::error::{Error, Result};
use crate::seed;

/// Stratified shuffle split.
///
/// Each label keeps `round(train_fraction * n_label)` rows for training. Rows
/// are ordered by canonical id before shuffling, so the result depends only on
/// the dataset's content and the seed, not on row order. Both halves come
/// back in canonical order.
pub fn train_test_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside (0,1)")));
    }
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset"));
    }
    let canonical = ds.canonical();
    let mut by_label: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for row in canonical.rows() {
        by_label.entry(row.label.as_str()).or_default().push(row);
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, mut rows) in by_label {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Stratify(format!("label {label:?} has {n} row(s); need at least 2")));
        }
        let n_train = (train_fraction * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Stratify(format!(
                "fraction {train_fraction} leaves label {label:?} ({n} rows) with an empty train or test side"
            )));
        }
        let mut rng = seed::rng(seed::derive(&[seed, seed::fnv1a(label.as_bytes())]));
        rows.shuffle(&mut rng);
        train.extend(rows[..n_train].iter().map(|r| (*r).clone()));
        test.extend(rows[n_train..].iter().map(|r| (*r).clone()));
    }
    Ok((Dataset::new(train)?.canonical(), Dataset::new(test)?.canonical()))
}
