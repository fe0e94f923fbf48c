use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::{LabelMap, Normalizer};
use crate::model::{Model, ModelConfig};
use crate::numerics::{Checkpoint, ParamStore};

pub const BUNDLE_FORMAT: u32 = 1;

const NORM_MEAN: &str = "norm.lfbe_mean";
const NORM_STD: &str = "norm.lfbe_std";

#[derive(Serialize, Deserialize)]
struct Metadata {
    format: u32,
    model_config: ModelConfig,
    label_map: LabelMap,
}

/// A trained model with what is needed to run it on new audio: LFBE
/// normalisation statistics and the label map.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub model: Model,
    pub normalizer: Normalizer,
    pub label_map: LabelMap,
}

impl ModelBundle {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let metadata = Metadata {
            format: BUNDLE_FORMAT,
            model_config: self.model.config().clone(),
            label_map: self.label_map.clone(),
        };
        let mut tensors: Vec<_> = self.normalizer.to_tensors().into_iter().collect();
        tensors.extend(
            self.model
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone())),
        );
        Checkpoint {
            metadata: serde_json::to_string(&metadata).expect("metadata serialises"),
            tensors,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, TrainError> {
        let meta: Metadata = serde_json::from_str(&ckpt.metadata)
            .map_err(|e| TrainError::Invalid(format!("checkpoint metadata: {e}")))?;
        if meta.format != BUNDLE_FORMAT {
            return Err(TrainError::Invalid(format!(
                "unsupported checkpoint format {}",
                meta.format
            )));
        }
        let stat = |name: &str| {
            ckpt.tensor(name)
                .ok_or_else(|| TrainError::Invalid(format!("checkpoint lacks `{name}`")))
        };
        let normalizer = Normalizer::from_tensors(stat(NORM_MEAN)?, stat(NORM_STD)?)?;
        let mut store = ParamStore::new();
        for (name, t) in ckpt.tensors {
            if name != NORM_MEAN && name != NORM_STD {
                store.insert(name, t);
            }
        }
        let model = Model::from_params(meta.model_config, store)?;
        if model.config().n_classes != meta.label_map.len() {
            return Err(TrainError::LabelMapMismatch {
                labels: meta.label_map.len(),
                classes: model.config().n_classes,
            });
        }
        Ok(Self {
            model,
            normalizer,
            label_map: meta.label_map,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
