use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::{Example, LabelMap, UNKNOWN_LABEL};
use crate::model::Model;

/// Gold-label rows × predicted-label columns. Rows follow the label map,
/// with a trailing `<unk>` row when such items were seen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub gold_labels: Vec<String>,
    pub predicted_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_items: usize,
    pub accuracy: f64,
    /// Includes `<unk>` (always 0) so the count-weighted mean equals
    /// `accuracy`.
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub class_counts: BTreeMap<String, usize>,
    pub confusion: Confusion,
    /// Predicted label per item, in input order.
    pub predictions: Vec<String>,
}

/// Scores `examples` with `model`. Items whose label is outside the label
/// map are always wrong.
pub fn evaluate(model: &Model, examples: &[Example], label_map: &LabelMap) -> Result<Evaluation, TrainError> {
    let classes = model.config().n_classes;
    if classes != label_map.len() {
        return Err(TrainError::LabelMapMismatch {
            labels: label_map.len(),
            classes,
        });
    }
    let predicted: Vec<usize> = examples
        .par_iter()
        .map(|ex| model.forward(&ex.input, false).map(|o| o.predicted()))
        .collect::<Result<_, _>>()?;

    let has_unk = examples.iter().any(|e| e.target.is_none());
    let mut gold_labels: Vec<String> = label_map.names().to_vec();
    if has_unk {
        gold_labels.push(UNKNOWN_LABEL.to_string());
    }
    let mut counts = vec![vec![0usize; classes]; gold_labels.len()];
    let mut correct = 0;
    for (ex, &p) in examples.iter().zip(&predicted) {
        let row = ex.target.unwrap_or(classes);
        counts[row][p] += 1;
        if ex.target == Some(p) {
            correct += 1;
        }
    }
    let mut per_class_accuracy = BTreeMap::new();
    let mut class_counts = BTreeMap::new();
    for (row, label) in gold_labels.iter().enumerate() {
        let n: usize = counts[row].iter().sum();
        if n == 0 {
            continue;
        }
        let hits = if row < classes { counts[row][row] } else { 0 };
        per_class_accuracy.insert(label.clone(), hits as f64 / n as f64);
        class_counts.insert(label.clone(), n);
    }
    Ok(Evaluation {
        n_items: examples.len(),
        accuracy: if examples.is_empty() {
            0.0
        } else {
            correct as f64 / examples.len() as f64
        },
        per_class_accuracy,
        class_counts,
        confusion: Confusion {
            gold_labels,
            predicted_labels: label_map.names().to_vec(),
            counts,
        },
        predictions: predicted.iter().map(|&p| label_map.name(p).to_string()).collect(),
    })
}
