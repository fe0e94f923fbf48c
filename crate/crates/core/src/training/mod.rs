//! Training loop with best-on-validation checkpointing, evaluation, the
//! multi-run protocol and report output.

mod bundle;
mod evaluate;
mod protocol;
mod stats;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bundle::{ModelBundle, BUNDLE_FORMAT};
pub use evaluate::{evaluate, Confusion, Evaluation};
pub use protocol::{run_protocol, Aggregate, Significance};
pub use stats::{
    mann_whitney_u, mann_whitney_u_with, midranks, Alternative, MannWhitney, PValueMethod, EXACT_MAX_SMALLER,
};

use crate::data::{make_batches, DataError, Dataset};
use crate::model::{argmax, Model, ModelConfig, ModelError};
use crate::numerics::{AdamConfig, AdamState, CheckpointError, NumericsError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("loss became non-finite at optimizer step {0}")]
    DivergedAtStep(u64),
    #[error("label map has {labels} classes but the model predicts {classes}")]
    LabelMapMismatch { labels: usize, classes: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl TrainError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub runs: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Sidedness of the significance test against a reference.
    pub alternative: Alternative,
    /// Where best checkpoints are written, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 32,
            epochs: 60,
            seed: 0,
            runs: 10,
            clip_norm: 5.0,
            alternative: Alternative::TwoSided,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Invalid(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0,1)");
        }
        if self.epsilon <= 0.0 || self.clip_norm <= 0.0 {
            return bad("epsilon and clip_norm must be positive");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the pre-update predictions seen while training.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub test: Evaluation,
    pub checkpoint: Option<PathBuf>,
}

impl RunResult {
    pub fn test_accuracy(&self) -> f64 {
        self.test.accuracy
    }

    /// `epoch,train_loss,val_loss,val_acc` rows.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.val_accuracy
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Ablation name of the trained arm.
    pub tag: String,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
    pub significance: Option<Significance>,
}

impl TrainReport {
    pub fn test_accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(RunResult::test_accuracy).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        serde_json::from_str(text).map_err(|e| TrainError::Invalid(format!("bad report JSON: {e}")))
    }
}

/// Everything one training run produces.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub result: RunResult,
    /// Parameters of the best validation epoch, rounded to 32-bit so a
    /// saved checkpoint reproduces them exactly.
    pub best: ModelBundle,
    /// Parameters after the final epoch.
    pub last: Model,
}

impl TrainOutcome {
    /// Single-run report for this outcome.
    pub fn report(&self, train_cfg: &TrainConfig) -> TrainReport {
        protocol::single_run_report(train_cfg, self.best.model.config(), self.result.clone())
    }
}

/// 1-based index of the smallest value; the earliest wins ties.
pub fn best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in val_losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i + 1)
}

fn diverged(step: u64) -> impl Fn(ModelError) -> TrainError {
    move |e| match e {
        ModelError::Numerics(NumericsError::NonFinite(_)) => TrainError::DivergedAtStep(step),
        other => TrainError::Model(other),
    }
}

/// Mean loss and accuracy over examples with a known target. `<unk>`
/// examples count as errors but have no loss.
fn loss_and_accuracy(model: &Model, examples: &[crate::data::Example]) -> Result<(f64, f64), ModelError> {
    let per: Vec<(Option<f64>, bool)> = examples
        .par_iter()
        .map(|ex| {
            let out = model.forward(&ex.input, false)?;
            Ok(match ex.target {
                Some(t) => {
                    let loss = -out.probs[t].max(f64::MIN_POSITIVE).ln();
                    (Some(loss), argmax(&out.probs) == t)
                }
                None => (None, false),
            })
        })
        .collect::<Result<_, ModelError>>()?;
    let losses: Vec<f64> = per.iter().filter_map(|p| p.0).collect();
    let correct = per.iter().filter(|p| p.1).count();
    let mean_loss = if losses.is_empty() {
        f64::NAN
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    };
    Ok((mean_loss, correct as f64 / examples.len().max(1) as f64))
}

/// Trains one model with `train_cfg.seed`.
pub fn train(
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    data: &Dataset,
) -> Result<TrainOutcome, TrainError> {
    train_run(train_cfg, model_cfg, data, 0, train_cfg.seed)
}

pub(crate) fn train_run(
    train_cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    data: &Dataset,
    run: usize,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    train_cfg.validate()?;
    let model_cfg = ModelConfig {
        n_classes: data.label_map.len(),
        ..model_cfg.clone()
    };
    if data.train.is_empty() {
        return Err(TrainError::Invalid("training split is empty".into()));
    }
    if !data.validation.iter().any(|e| e.target.is_some()) {
        return Err(TrainError::Invalid(
            "validation split has no examples with a training label".into(),
        ));
    }
    let train_set: Vec<_> = data.train.iter().filter(|e| e.target.is_some()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(model_cfg, &mut rng)?;
    let mut adam = AdamState::new(model.params(), train_cfg.adam());
    let mut epochs = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(f64, crate::numerics::ParamStore)> = None;
    let mut best_idx = 0;

    for epoch in 0..train_cfg.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in make_batches(train_set.len(), train_cfg.batch_size, seed, epoch) {
            let step = adam.step_count + 1;
            let outputs = batch
                .par_iter()
                .map(|&i| {
                    let ex = train_set[i];
                    model.loss_and_grads(&ex.input, ex.target.expect("filtered"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(diverged(step))?;
            let store = model.params_mut();
            store.zero_grads();
            for (out, &i) in outputs.iter().zip(&batch) {
                if !out.loss.is_finite() {
                    return Err(TrainError::DivergedAtStep(step));
                }
                loss_sum += out.loss;
                correct += usize::from(argmax(&out.logits) == train_set[i].target.expect("filtered"));
                store
                    .accumulate(&out.grads)
                    .map_err(|e| TrainError::Model(e.into()))?;
            }
            store.scale_grads(1.0 / batch.len() as f64);
            store.clip_grad_norm(train_cfg.clip_norm);
            adam.step(store);
            if store.iter().any(|p| !p.value.is_finite()) {
                return Err(TrainError::DivergedAtStep(step));
            }
        }
        let (val_loss, val_accuracy) =
            loss_and_accuracy(&model, &data.validation).map_err(diverged(adam.step_count))?;
        if !val_loss.is_finite() {
            return Err(TrainError::DivergedAtStep(adam.step_count));
        }
        epochs.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            let mut snapshot = model.params().clone();
            snapshot.round_to_f32();
            best = Some((val_loss, snapshot));
            best_idx = epoch + 1;
        }
    }

    let (best_val_loss, best_params) = best.expect("at least one epoch");
    let best_model = Model::from_params(model.config().clone(), best_params)?;
    let bundle = ModelBundle {
        model: best_model,
        normalizer: data.normalizer.clone(),
        label_map: data.label_map.clone(),
    };
    let test = evaluate(&bundle.model, &data.test, &data.label_map)?;
    let checkpoint = match &train_cfg.checkpoint_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
            let path = dir.join(format!("run_{run:02}.ckpt"));
            bundle.save(&path)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        result: RunResult {
            run,
            seed,
            epochs,
            best_epoch: best_idx,
            best_val_loss,
            test,
            checkpoint,
        },
        best: bundle,
        last: model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_epoch_is_one_based_argmin() {
        assert_eq!(best_epoch(&[0.9, 0.7, 0.8]), Some(2));
        assert_eq!(best_epoch(&[0.5, 0.5]), Some(1));
        assert_eq!(best_epoch(&[]), None);
    }
}
