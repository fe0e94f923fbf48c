//! Gate diagnostics: per-utterance matrices and their histogram summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;

pub const HISTOGRAM_BINS: usize = 20;
/// Range of the local gate histogram.
pub const BETA_RANGE: (f64, f64) = (0.0, 1.0);
/// Range of the fused global score histogram.
pub const SCORE_RANGE: (f64, f64) = (-1.0, 1.0);

/// Gate values recorded during one forward pass.
///
/// `local_beta` is `t × d_p` (all ones for the concatenation ablation,
/// absent when no local prosody is used). `global_score` is `t × m`: the
/// fused `S ⊙ G` under dual gating or the softmax weights under the
/// attention ablation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateTrace {
    pub local_beta: Option<Tensor>,
    pub similarity: Option<Tensor>,
    pub gate: Option<Tensor>,
    pub global_score: Option<Tensor>,
    /// Similarity affinities after mean removal.
    pub similarity_centered: Option<Tensor>,
    /// Dissimilarity affinities after mean removal.
    pub dissimilarity_centered: Option<Tensor>,
}

fn all_in(t: &Option<Tensor>, lo: f64, hi: f64, open: bool) -> bool {
    t.as_ref().is_none_or(|t| {
        t.data().iter().all(|&v| {
            if open {
                v > lo && v < hi
            } else {
                v >= lo && v <= hi
            }
        })
    })
}

impl GateTrace {
    /// Checks the range invariants. The local gate may saturate to exactly
    /// 1 only under the concatenation ablation, so it is checked on the
    /// closed interval when `beta_closed` is set.
    pub fn check_ranges(&self, beta_closed: bool) -> Result<(), String> {
        if !all_in(&self.local_beta, 0.0, 1.0, !beta_closed) {
            return Err("local gate outside (0,1)".into());
        }
        if !all_in(&self.similarity, -1.0, 1.0, true) {
            return Err("similarity outside (-1,1)".into());
        }
        if !all_in(&self.gate, 0.0, 1.0, true) {
            return Err("dissimilarity gate outside (0,1)".into());
        }
        if !all_in(&self.global_score, -1.0, 1.0, true) {
            return Err("global score outside (-1,1)".into());
        }
        Ok(())
    }

    pub fn beta_summary(&self) -> Option<BetaSummary> {
        self.local_beta
            .as_ref()
            .map(|b| BetaSummary::from_values(b.data()))
    }

    pub fn score_histogram(&self) -> Option<Vec<f64>> {
        self.global_score
            .as_ref()
            .map(|s| histogram(s.data().iter().copied(), SCORE_RANGE, HISTOGRAM_BINS))
    }

    pub fn record(&self, id: &str, label: &str, predicted: &str) -> GateTraceRecord {
        GateTraceRecord {
            id: id.to_string(),
            label: label.to_string(),
            predicted: predicted.to_string(),
            local_beta_summary: self.beta_summary(),
            global_score_histogram_20bins: self.score_histogram(),
        }
    }
}

/// Normalised histogram (bin masses sum to 1) over `[lo, hi]`. Values at
/// or beyond the edges land in the outer bins.
pub fn histogram(values: impl Iterator<Item = f64>, (lo, hi): (f64, f64), bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let mut n = 0usize;
    for v in values {
        let pos = ((v - lo) / (hi - lo) * bins as f64).floor();
        let idx = (pos.max(0.0) as usize).min(bins - 1);
        counts[idx] += 1.0;
        n += 1;
    }
    if n > 0 {
        counts.iter_mut().for_each(|c| *c /= n as f64);
    }
    counts
}

pub fn bin_edges((lo, hi): (f64, f64), bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram_20bins: Vec<f64>,
}

impl BetaSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            min,
            max,
            mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
            histogram_20bins: histogram(values.iter().copied(), BETA_RANGE, HISTOGRAM_BINS),
        }
    }
}

/// One JSON-lines record of the gate export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateTraceRecord {
    pub id: String,
    pub label: String,
    pub predicted: String,
    pub local_beta_summary: Option<BetaSummary>,
    pub global_score_histogram_20bins: Option<Vec<f64>>,
}

/// Per-label pooled histograms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelGateSummary {
    pub utterances: usize,
    pub beta_bin_edges: Vec<f64>,
    pub beta_histogram: Option<Vec<f64>>,
    pub global_bin_edges: Vec<f64>,
    pub global_score_histogram: Option<Vec<f64>>,
}

/// Pools raw gate values per label.
#[derive(Debug, Default)]
pub struct GateAccumulator {
    per_label: BTreeMap<String, (usize, Vec<f64>, Vec<f64>)>,
}

impl GateAccumulator {
    pub fn add(&mut self, label: &str, trace: &GateTrace) {
        let entry = self.per_label.entry(label.to_string()).or_default();
        entry.0 += 1;
        if let Some(b) = &trace.local_beta {
            entry.1.extend_from_slice(b.data());
        }
        if let Some(s) = &trace.global_score {
            entry.2.extend_from_slice(s.data());
        }
    }

    pub fn summaries(&self) -> BTreeMap<String, LabelGateSummary> {
        self.per_label
            .iter()
            .map(|(label, (n, beta, score))| {
                let hist = |v: &Vec<f64>, range| {
                    (!v.is_empty()).then(|| histogram(v.iter().copied(), range, HISTOGRAM_BINS))
                };
                let summary = LabelGateSummary {
                    utterances: *n,
                    beta_bin_edges: bin_edges(BETA_RANGE, HISTOGRAM_BINS),
                    beta_histogram: hist(beta, BETA_RANGE),
                    global_bin_edges: bin_edges(SCORE_RANGE, HISTOGRAM_BINS),
                    global_score_histogram: hist(score, SCORE_RANGE),
                };
                (label.clone(), summary)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_normalised_and_clamped() {
        let h = histogram([0.0, 0.5, 1.0, 1.0].into_iter(), BETA_RANGE, 20);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h[19], 0.5);
        assert_eq!(h[0], 0.25);
        assert_eq!(h[10], 0.25);
    }

    #[test]
    fn edges_cover_range() {
        let e = bin_edges(SCORE_RANGE, 20);
        assert_eq!(e.len(), 21);
        assert_eq!(e[0], -1.0);
        assert_eq!(e[20], 1.0);
    }
}
