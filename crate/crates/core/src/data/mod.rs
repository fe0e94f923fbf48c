//! Manifests, label combining, WAV I/O, the synthetic corpus and batching.

mod batch;
mod dataset;
mod labels;
mod manifest;
mod synth;
mod wav;

use std::path::{Path, PathBuf};

pub use batch::{make_batches, EpochBatches};
pub use dataset::{featurize, Dataset, Example, LabeledFeatures, Normalizer};
pub use labels::{combine_labels, LabelMap, UNKNOWN_LABEL};
pub use manifest::{load_manifest, CorpusManifests, Manifest, ManifestEntry, Split};
pub use synth::{synth_generate, synth_split, synth_utterance, SynthConfig, SynthUtterance, SYNTH_CLASSES};
pub use wav::{read_wav, write_wav};

use crate::features::FeatureError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("label list is empty")]
    EmptyLabels,
    #[error("manifest line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("audio file missing for: {}", .0.join(", "))]
    MissingAudio(Vec<String>),
    #[error("{}: {message}", path.display())]
    Audio { path: PathBuf, message: String },
    #[error("utterance `{id}`: {message}")]
    Utterance { id: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
