use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dataset, ForestModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub lowest_f1: f64,
    pub lowest_f1_label: String,
    /// Rows are true classes, columns predictions, both in label-dictionary order.
    pub confusion: Vec<Vec<u32>>,
    pub n_test: usize,
    /// Test rows whose label the model never saw; counted as errors.
    pub n_unknown_label: usize,
}

impl MetricsReport {
    /// Builds the report from class-index pairs. `truth` of `None` marks a
    /// label outside the dictionary.
    pub fn from_predictions(labels: &[String], truth: &[Option<usize>], predicted: &[usize]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Empty("no test rows to evaluate"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch(format!("{} truths vs {} predictions", truth.len(), predicted.len())));
        }
        let k = labels.len();
        let mut confusion = vec![vec![0u32; k]; k];
        let mut predicted_counts = vec![0u32; k];
        let mut correct = 0usize;
        let mut unknown = 0usize;
        for (t, &p) in truth.iter().zip(predicted) {
            predicted_counts[p] += 1;
            match t {
                Some(t) => {
                    confusion[*t][p] += 1;
                    if *t == p {
                        correct += 1;
                    }
                }
                None => unknown += 1,
            }
        }
        let ratio = |num: u32, den: u32| if den == 0 { 0.0 } else { f64::from(num) / f64::from(den) };
        let classes: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: u32 = confusion[c].iter().sum();
                let precision = ratio(tp, predicted_counts[c]);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    label: labels[c].clone(),
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let macro_of = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k.max(1) as f64;
        let lowest = classes
            .iter()
            .fold(None::<&ClassMetrics>, |lo, c| match lo {
                Some(l) if l.f1 <= c.f1 => Some(l),
                _ => Some(c),
            });
        Ok(Self {
            accuracy: correct as f64 / truth.len() as f64,
            macro_precision: macro_of(|c| c.precision),
            macro_recall: macro_of(|c| c.recall),
            macro_f1: macro_of(|c| c.f1),
            lowest_f1: lowest.map_or(0.0, |c| c.f1),
            lowest_f1_label: lowest.map_or_else(String::new, |c| c.label.clone()),
            classes,
            confusion,
            n_test: truth.len(),
            n_unknown_label: unknown,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Accuracy, per-class and macro-averaged precision/recall/F1 on `test`.
pub fn evaluate(model: &ForestModel, test: &Dataset) -> Result<MetricsReport> {
    let truth: Vec<Option<usize>> = test
        .rows()
        .iter()
        .map(|r| model.labels.iter().position(|l| *l == r.label))
        .collect();
    let predicted = test
        .rows()
        .iter()
        .map(|r| model.predict_index(&r.features))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_predictions(&model.labels, &truth, &predicted)
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.classes.iter().map(|c| c.label.len()).max().unwrap_or(5).max(9);
        writeln!(f, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}", "class", "precision", "recall", "f1", "support")?;
        for c in &self.classes {
            writeln!(
                f,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                c.label, c.precision, c.recall, c.f1, c.support
            )?;
        }
        writeln!(
            f,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
            "macro avg", self.macro_precision, self.macro_recall, self.macro_f1, self.n_test
        )?;
        writeln!(f, "accuracy   {:.4}", self.accuracy)?;
        write!(f, "lowest f1  {:.4} ({})", self.lowest_f1, self.lowest_f1_label)
    }
}
