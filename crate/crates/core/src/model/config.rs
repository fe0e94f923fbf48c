use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::{ENERGY_DIM, LFBE_DIM, PITCH_DIM};

/// How prosody enters each frame before the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalFusion {
    /// `[β ⊙ p ; ℓ]` with a learned gate.
    Gated,
    /// `[p ; ℓ]`, i.e. the gate pinned at 1.
    Concat,
    /// LFBE only.
    None,
}

/// How the CNN prosody rows are attended by the encoder states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlobalFusion {
    /// Similarity × dissimilarity gate.
    DualGate,
    /// Row-wise softmax over the similarity affinities.
    SoftmaxAttention,
    /// No global branch.
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    Baseline,
    LocalConcat,
    NoLocalGate,
    NoGlobalGate,
    GlobalEncoderOnly,
    NoPitch,
    NoEnergy,
}

impl Ablation {
    pub const ALL: [Ablation; 8] = [
        Ablation::Full,
        Ablation::Baseline,
        Ablation::LocalConcat,
        Ablation::NoLocalGate,
        Ablation::NoGlobalGate,
        Ablation::GlobalEncoderOnly,
        Ablation::NoPitch,
        Ablation::NoEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::Baseline => "baseline",
            Ablation::LocalConcat => "local_concat",
            Ablation::NoLocalGate => "no_local_gate",
            Ablation::NoGlobalGate => "no_global_gate",
            Ablation::GlobalEncoderOnly => "global_encoder_only",
            Ablation::NoPitch => "no_pitch",
            Ablation::NoEnergy => "no_energy",
        }
    }

    pub fn local_fusion(self) -> LocalFusion {
        match self {
            Ablation::Baseline | Ablation::NoLocalGate => LocalFusion::None,
            Ablation::LocalConcat | Ablation::GlobalEncoderOnly => LocalFusion::Concat,
            _ => LocalFusion::Gated,
        }
    }

    pub fn global_fusion(self) -> GlobalFusion {
        match self {
            Ablation::Baseline => GlobalFusion::None,
            Ablation::NoGlobalGate | Ablation::GlobalEncoderOnly => GlobalFusion::SoftmaxAttention,
            _ => GlobalFusion::DualGate,
        }
    }

    /// Whether the prosody embedding (and hence the CNN) exists at all.
    pub fn uses_prosody(self) -> bool {
        self != Ablation::Baseline
    }

    /// Column range of the raw prosody input that is zeroed.
    pub fn masked_prosody(self) -> Option<std::ops::Range<usize>> {
        match self {
            Ablation::NoEnergy => Some(0..ENERGY_DIM),
            Ablation::NoPitch => Some(ENERGY_DIM..ENERGY_DIM + PITCH_DIM),
            _ => None,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ModelError::UnknownAblation(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lfbe_dim: usize,
    pub prosody_in_dim: usize,
    pub prosody_embed_dim: usize,
    pub lstm_layers: usize,
    /// Width of each encoder layer's output; each direction gets half.
    pub lstm_hidden: usize,
    pub cnn_kernel_lengths: Vec<usize>,
    pub cnn_filters_per_kernel: usize,
    pub affinity_dim: usize,
    pub n_classes: usize,
    /// Separate projection pairs for the similarity and dissimilarity
    /// affinities instead of one shared pair.
    pub separate_projections: bool,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lfbe_dim: LFBE_DIM,
            prosody_in_dim: ENERGY_DIM + PITCH_DIM,
            prosody_embed_dim: 32,
            lstm_layers: 3,
            lstm_hidden: 512,
            cnn_kernel_lengths: vec![5, 10, 25, 50],
            cnn_filters_per_kernel: 64,
            affinity_dim: 128,
            n_classes: 4,
            separate_projections: false,
            ablation: Ablation::Full,
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and desk-scale experiments.
    pub fn tiny(n_classes: usize) -> Self {
        Self {
            prosody_embed_dim: 4,
            lstm_layers: 1,
            lstm_hidden: 8,
            cnn_filters_per_kernel: 3,
            affinity_dim: 8,
            n_classes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.lfbe_dim != LFBE_DIM {
            return bad(format!("lfbe_dim must be {LFBE_DIM}, got {}", self.lfbe_dim));
        }
        if self.prosody_in_dim != ENERGY_DIM + PITCH_DIM {
            return bad(format!("prosody_in_dim must be 6, got {}", self.prosody_in_dim));
        }
        for (name, v) in [
            ("prosody_embed_dim", self.prosody_embed_dim),
            ("lstm_layers", self.lstm_layers),
            ("lstm_hidden", self.lstm_hidden),
            ("cnn_filters_per_kernel", self.cnn_filters_per_kernel),
            ("affinity_dim", self.affinity_dim),
            ("n_classes", self.n_classes),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !self.lstm_hidden.is_multiple_of(2) {
            return bad(format!("lstm_hidden must be even, got {}", self.lstm_hidden));
        }
        if self.cnn_kernel_lengths.is_empty() || self.cnn_kernel_lengths.contains(&0) {
            return bad("cnn_kernel_lengths must be non-empty and positive".into());
        }
        Ok(())
    }

    /// Width of the first encoder layer's input.
    pub fn encoder_input_dim(&self) -> usize {
        match self.ablation.local_fusion() {
            LocalFusion::None => self.lfbe_dim,
            _ => self.prosody_embed_dim + self.lfbe_dim,
        }
    }

    /// Width of the pooled utterance vector fed to the classifier.
    pub fn pooled_dim(&self) -> usize {
        match self.ablation.global_fusion() {
            GlobalFusion::None => self.lstm_hidden,
            _ => self.lstm_hidden + self.cnn_filters_per_kernel,
        }
    }

    /// Number of prosody rows attended by the encoder states.
    pub fn global_rows(&self) -> usize {
        self.cnn_kernel_lengths.len()
    }
}

/// Returns `config` switched to `mode`.
pub fn ablate(config: &ModelConfig, mode: Ablation) -> ModelConfig {
    ModelConfig {
        ablation: mode,
        ..config.clone()
    }
}

/// [`ablate`] with the mode given by name.
pub fn ablate_named(config: &ModelConfig, mode: &str) -> Result<ModelConfig, ModelError> {
    Ok(ablate(config, mode.parse()?))
}
