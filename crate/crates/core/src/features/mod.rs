//! Audio frontend: 25 ms / 10 ms framing, 40-band LFBE, three energy
//! features and three pitch features per frame, all on one frame grid.

pub mod cache;
mod energy;
mod frame;
mod mel;
mod pitch;

use serde::{Deserialize, Serialize};

pub use energy::extract_energy;
pub use frame::{frame_count, frame_signal, hamming, ms_to_samples};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank, PowerSpectrum};
pub use pitch::{extract_pitch, pitch_features, track_pitch, PitchConfig, PitchTrack};

pub const LFBE_DIM: usize = 40;
pub const ENERGY_DIM: usize = 3;
pub const PITCH_DIM: usize = 3;
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("utterance has {samples} samples, shorter than one {window}-sample window")]
    UtteranceTooShort { samples: usize, window: usize },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
    #[error("feature cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono audio at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, FeatureError> {
        if sample_rate == 0 {
            return Err(FeatureError::InvalidWaveform("sample rate is zero".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(FeatureError::InvalidWaveform(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub lfbe: [f64; LFBE_DIM],
    pub energy: [f64; ENERGY_DIM],
    pub pitch: [f64; PITCH_DIM],
}

impl Default for FrameFeatures {
    fn default() -> Self {
        Self {
            lfbe: [0.0; LFBE_DIM],
            energy: [0.0; ENERGY_DIM],
            pitch: [0.0; PITCH_DIM],
        }
    }
}

impl FrameFeatures {
    pub fn is_finite(&self) -> bool {
        self.lfbe
            .iter()
            .chain(&self.energy)
            .chain(&self.pitch)
            .all(|v| v.is_finite())
    }
}

/// Aligned per-frame features of one utterance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSequence {
    pub frames: Vec<FrameFeatures>,
}

impl FeatureSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self {
            frames: self.frames.iter().rev().cloned().collect(),
        }
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            frames: self.frames[..len.min(self.frames.len())].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub log_floor: f64,
    pub pitch: PitchConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 256,
            log_floor: LOG_FLOOR,
            pitch: PitchConfig::default(),
        }
    }
}

/// Reusable spectral front end (FFT plan + filterbank) for one config.
pub struct Frontend {
    config: FeatureConfig,
    spectrum: PowerSpectrum,
    filterbank: MelFilterbank,
}

impl Frontend {
    pub fn new(config: FeatureConfig) -> Self {
        let spectrum = PowerSpectrum::new(config.fft_size);
        let filterbank = MelFilterbank::new(
            LFBE_DIM,
            config.fft_size,
            config.sample_rate,
            0.0,
            config.sample_rate as f64 / 2.0,
        );
        Self {
            config,
            spectrum,
            filterbank,
        }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Pre-log mel energies of already-windowed frames.
    pub fn mel_energies(&self, windows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        windows
            .iter()
            .map(|w| self.filterbank.apply(&self.spectrum.compute(w)))
            .collect()
    }

    pub fn extract(&self, wave: &Waveform) -> Result<FeatureSequence, FeatureError> {
        let cfg = &self.config;
        if wave.sample_rate != cfg.sample_rate {
            return Err(FeatureError::InvalidWaveform(format!(
                "sample rate {} Hz, frontend configured for {} Hz",
                wave.sample_rate, cfg.sample_rate
            )));
        }
        let windows = frame_signal(wave, cfg.window_ms, cfg.hop_ms)?;
        let mel = self.mel_energies(&windows);
        let energy = extract_energy(&mel, cfg.log_floor);
        let pitch = extract_pitch(wave, cfg.window_ms, cfg.hop_ms, &cfg.pitch)?;
        debug_assert_eq!(pitch.len(), mel.len());
        let frames = mel
            .iter()
            .zip(energy)
            .zip(pitch)
            .map(|((bands, energy), pitch)| {
                let mut lfbe = [0.0; LFBE_DIM];
                for (o, &e) in lfbe.iter_mut().zip(bands) {
                    *o = e.max(cfg.log_floor).ln();
                }
                FrameFeatures { lfbe, energy, pitch }
            })
            .collect();
        Ok(FeatureSequence { frames })
    }
}

/// Natural-log mel filterbank energies (floored) of windowed frames.
pub fn extract_lfbe(windows: &[Vec<f64>], sample_rate: u32, n_mels: usize) -> Vec<Vec<f64>> {
    let fft_size = windows.first().map_or(256, |w| w.len().next_power_of_two());
    let spectrum = PowerSpectrum::new(fft_size);
    let fb = MelFilterbank::new(n_mels, fft_size, sample_rate, 0.0, sample_rate as f64 / 2.0);
    windows
        .iter()
        .map(|w| {
            fb.apply(&spectrum.compute(w))
                .into_iter()
                .map(|e| e.max(LOG_FLOOR).ln())
                .collect()
        })
        .collect()
}

/// Full feature extraction with the default 8 kHz configuration.
pub fn extract_features(wave: &Waveform) -> Result<FeatureSequence, FeatureError> {
    Frontend::new(FeatureConfig {
        sample_rate: wave.sample_rate,
        ..FeatureConfig::default()
    })
    .extract(wave)
}
