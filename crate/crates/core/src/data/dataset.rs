use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::{
    load_manifest, read_wav, synth_split, DataError, LabelMap, Manifest, Split, SynthConfig, SYNTH_CLASSES,
};
use crate::features::{cache, FeatureConfig, FeatureSequence, Frontend, LFBE_DIM};
use crate::model::ModelInput;
use crate::numerics::Tensor;

const STD_FLOOR: f64 = 1e-6;

/// Per-dimension LFBE z-normalisation fitted on the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; LFBE_DIM],
            std: vec![1.0; LFBE_DIM],
        }
    }

    /// Statistics are rounded to 32-bit so a checkpointed normaliser is
    /// identical to the fitted one.
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Self {
        let mut sum = vec![0.0; LFBE_DIM];
        let mut sq = vec![0.0; LFBE_DIM];
        let mut n = 0usize;
        for seq in seqs {
            for f in &seq.frames {
                for (d, &v) in f.lfbe.iter().enumerate() {
                    sum[d] += v;
                    sq[d] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n as f64 - m * m).max(0.0).sqrt().max(STD_FLOOR) as f32 as f64)
            .collect();
        Self {
            mean: mean.into_iter().map(|m| m as f32 as f64).collect(),
            std,
        }
    }

    /// Model input with normalised LFBE and raw prosody.
    pub fn apply(&self, seq: &FeatureSequence) -> Result<ModelInput, DataError> {
        let mut input = ModelInput::from_features(seq)?;
        for r in 0..input.lfbe.rows() {
            for (d, v) in input.lfbe.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[d]) / self.std[d];
            }
        }
        Ok(input)
    }

    pub fn to_tensors(&self) -> [(String, Tensor); 2] {
        [
            ("norm.lfbe_mean".into(), Tensor::row_vector(self.mean.clone())),
            ("norm.lfbe_std".into(), Tensor::row_vector(self.std.clone())),
        ]
    }

    pub fn from_tensors(mean: &Tensor, std: &Tensor) -> Result<Self, DataError> {
        if mean.len() != LFBE_DIM || std.len() != LFBE_DIM {
            return Err(DataError::Invalid(
                "normalisation statistics must have 40 entries".into(),
            ));
        }
        Ok(Self {
            mean: mean.data().to_vec(),
            std: std.data().to_vec(),
        })
    }
}

/// Extracted features of one utterance with its combined label.
#[derive(Clone, Debug)]
pub struct LabeledFeatures {
    pub id: String,
    pub label: String,
    pub features: FeatureSequence,
}

/// Ready-to-train utterance. `target` is `None` for `<unk>`.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub label: String,
    pub target: Option<usize>,
    pub input: ModelInput,
}

/// All three splits prepared for the model.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub label_map: LabelMap,
    pub normalizer: Normalizer,
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    /// Builds the label map and normaliser from `train`.
    pub fn from_features(
        train: Vec<LabeledFeatures>,
        validation: Vec<LabeledFeatures>,
        test: Vec<LabeledFeatures>,
    ) -> Result<Self, DataError> {
        let label_map = LabelMap::from_labels(train.iter().map(|u| u.label.as_str()));
        let normalizer = Normalizer::fit(train.iter().map(|u| &u.features));
        Self::with_stats(label_map, normalizer, train, validation, test)
    }

    pub fn with_stats(
        label_map: LabelMap,
        normalizer: Normalizer,
        train: Vec<LabeledFeatures>,
        validation: Vec<LabeledFeatures>,
        test: Vec<LabeledFeatures>,
    ) -> Result<Self, DataError> {
        let prep = |items: Vec<LabeledFeatures>| {
            items
                .into_iter()
                .map(|u| {
                    Ok(Example {
                        target: label_map.index(&u.label),
                        input: normalizer.apply(&u.features)?,
                        id: u.id,
                        label: u.label,
                    })
                })
                .collect::<Result<Vec<_>, DataError>>()
        };
        Ok(Self {
            train: prep(train)?,
            validation: prep(validation)?,
            test: prep(test)?,
            label_map: label_map.clone(),
            normalizer: normalizer.clone(),
        })
    }

    /// Synthetic corpus generated and featurised in memory.
    pub fn from_synth(cfg: &SynthConfig) -> Result<Self, DataError> {
        let frontend = Frontend::new(FeatureConfig {
            sample_rate: cfg.sample_rate,
            ..FeatureConfig::default()
        });
        let split = |s: Split| {
            synth_split(cfg, s)
                .into_par_iter()
                .map(|u| {
                    Ok(LabeledFeatures {
                        features: frontend.extract(&u.wave)?,
                        label: SYNTH_CLASSES[u.class].to_string(),
                        id: u.id,
                    })
                })
                .collect::<Result<Vec<_>, DataError>>()
        };
        Self::from_features(
            split(Split::Train)?,
            split(Split::Validation)?,
            split(Split::Test)?,
        )
    }

    /// Loads a corpus directory (`train.tsv`, `validation.tsv`, `test.tsv`).
    /// A `<split>.feat` cache next to a manifest is used instead of the
    /// audio when present.
    pub fn load(dir: &Path, features: &FeatureConfig) -> Result<Self, DataError> {
        let manifests = load_manifest(dir)?;
        let frontend = Frontend::new(features.clone());
        let split = |s: Split| {
            let cache_path = dir.join(format!("{}.feat", s.name()));
            let cached = cache_path.is_file().then_some(cache_path);
            featurize(manifests.split(s), &frontend, cached.as_deref())
        };
        Self::from_features(
            split(Split::Train)?,
            split(Split::Validation)?,
            split(Split::Test)?,
        )
    }

    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Features for every manifest entry, from `cache` when given (ids must
/// all be present) or by reading and featurising the audio.
pub fn featurize(
    manifest: &Manifest,
    frontend: &Frontend,
    cache: Option<&Path>,
) -> Result<Vec<LabeledFeatures>, DataError> {
    if let Some(path) = cache {
        let mut records: HashMap<String, FeatureSequence> = cache::load_cache(path)?.into_iter().collect();
        return manifest
            .entries
            .iter()
            .map(|e| {
                let features = records.remove(&e.id).ok_or_else(|| {
                    DataError::Invalid(format!(
                        "feature cache {} has no record for `{}`",
                        path.display(),
                        e.id
                    ))
                })?;
                Ok(LabeledFeatures {
                    id: e.id.clone(),
                    label: e.label(),
                    features,
                })
            })
            .collect();
    }
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let wave = read_wav(&manifest.resolve(e))?;
            let features = frontend.extract(&wave).map_err(|err| DataError::Utterance {
                id: e.id.clone(),
                message: err.to_string(),
            })?;
            Ok(LabeledFeatures {
                id: e.id.clone(),
                label: e.label(),
                features,
            })
        })
        .collect()
}
