use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    mann_whitney_u_with, train_run, Alternative, PValueMethod, TrainConfig, TrainError, TrainReport,
};
use crate::data::Dataset;
use crate::model::ModelConfig;

/// Mean and sample standard deviation of per-run test accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for one run.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Mann-Whitney comparison of this arm's test accuracies against a
/// reference arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub reference: String,
    pub reference_mean: f64,
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
    pub alternative: Alternative,
}

impl Significance {
    pub fn compare(
        arm: &[f64],
        reference: &TrainReport,
        alternative: Alternative,
    ) -> Result<Self, TrainError> {
        let base = reference.test_accuracies();
        let mw = mann_whitney_u_with(arm, &base, alternative)?;
        Ok(Self {
            reference: reference.tag.clone(),
            reference_mean: reference.aggregate.mean,
            u_statistic: mw.u_a,
            p_value: mw.p_value,
            method: mw.method,
            alternative,
        })
    }
}

/// Trains `train_cfg.runs` models with seeds `seed + run` and aggregates
/// their test accuracies; compares against `reference` when given.
pub fn run_protocol(
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    data: &Dataset,
    reference: Option<&TrainReport>,
) -> Result<TrainReport, TrainError> {
    train_cfg.validate()?;
    let runs = (0..train_cfg.runs)
        .into_par_iter()
        .map(|r| {
            let seed = train_cfg.seed.wrapping_add(r as u64);
            train_run(train_cfg, model_cfg, data, r, seed).map(|o| o.result)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let accs: Vec<f64> = runs.iter().map(|r| r.test.accuracy).collect();
    let significance = reference
        .map(|r| Significance::compare(&accs, r, train_cfg.alternative))
        .transpose()?;
    Ok(TrainReport {
        tag: model_cfg.ablation.name().to_string(),
        model_config: ModelConfig {
            n_classes: data.label_map.len(),
            ..model_cfg.clone()
        },
        train_config: train_cfg.clone(),
        aggregate: Aggregate::of(&accs),
        runs,
        significance,
    })
}

/// Single-run report for [`super::train`] output.
pub(crate) fn single_run_report(
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    result: super::RunResult,
) -> TrainReport {
    let accs = [result.test.accuracy];
    TrainReport {
        tag: model_cfg.ablation.name().to_string(),
        model_config: model_cfg.clone(),
        train_config: train_cfg.clone(),
        aggregate: Aggregate::of(&accs),
        runs: vec![result],
        significance: None,
    }
}
