//! Synthetic prosody-labelled corpus.
//!
//! Four classes of harmonic tones whose identity lives in the prosody:
//! rising pitch, falling pitch, flat pitch with a late energy burst, flat
//! pitch with an early burst. Fundamental, spectral tilt, formants, noise
//! level and loudness are drawn from the same distributions for every
//! class.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{load_manifest, write_wav, CorpusManifests, DataError, Manifest, ManifestEntry, Split};
use crate::features::Waveform;

pub const SYNTH_CLASSES: [&str; 4] = ["rising", "falling", "late_burst", "early_burst"];

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub train_per_class: usize,
    pub validation_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
    pub sample_rate: u32,
}

impl SynthConfig {
    /// `n` training items per class; validation and test get `ceil(n/2)`.
    pub fn new(n_per_class: usize, seed: u64) -> Self {
        let held_out = n_per_class.div_ceil(2);
        Self {
            train_per_class: n_per_class,
            validation_per_class: held_out,
            test_per_class: held_out,
            seed,
            sample_rate: 8000,
        }
    }

    pub fn per_class(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_per_class,
            Split::Validation => self.validation_per_class,
            Split::Test => self.test_per_class,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthUtterance {
    pub id: String,
    pub class: usize,
    pub wave: Waveform,
}

impl SynthUtterance {
    pub fn label(&self) -> &'static str {
        SYNTH_CLASSES[self.class]
    }
}

/// Smooth random modulation: a few low-frequency sinusoids.
fn slow_wobble(rng: &mut impl Rng, depth: f64) -> impl Fn(f64) -> f64 {
    let parts: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..2.0 * PI),
                depth * rng.random_range(0.3..1.0) / 3.0,
            )
        })
        .collect();
    move |t: f64| {
        parts
            .iter()
            .map(|&(hz, phase, a)| a * (2.0 * PI * hz * t + phase).sin())
            .sum()
    }
}

/// Renders one utterance of `class` (index into [`SYNTH_CLASSES`]).
pub fn synth_utterance(class: usize, rng: &mut impl Rng, sample_rate: u32) -> Waveform {
    assert!(class < SYNTH_CLASSES.len(), "unknown synthetic class {class}");
    let sr = sample_rate as f64;
    let duration = rng.random_range(0.8..1.5);
    let n = (duration * sr) as usize;

    let f0 = (rng.random_range(110f64.ln()..220f64.ln())).exp();
    let sweep = rng.random_range(0.5..0.8);
    let curve = rng.random_range(-0.3..0.3);
    let jitter = slow_wobble(rng, 0.03);
    let log_f0 = move |u: f64| -> f64 {
        // u ∈ [0,1] is normalised time.
        let shape = u + curve * u * (1.0 - u);
        let contour = match class {
            0 => sweep * (shape - 0.5),
            1 => -sweep * (shape - 0.5),
            _ => 0.0,
        };
        f0.ln() + contour + jitter(u * duration)
    };

    let tilt = rng.random_range(0.6..1.6);
    let formants: Vec<(f64, f64, f64, f64)> = [(300.0, 900.0), (900.0, 2500.0)]
        .iter()
        .map(|&(lo, hi)| {
            let centre: f64 = rng.random_range(lo..hi);
            let drift = rng.random_range(-0.15..0.15);
            (
                centre,
                drift,
                rng.random_range(80.0..220.0),
                rng.random_range(2.0..6.0),
            )
        })
        .collect();
    let harmonic_gain = |freq: f64, u: f64, h: usize| -> f64 {
        let shape: f64 = formants
            .iter()
            .map(|&(c, drift, bw, gain)| {
                let centre = c * (1.0 + drift * (u - 0.5));
                gain * (-((freq - centre) / bw).powi(2)).exp()
            })
            .sum();
        (h as f64).powf(-tilt) * (1.0 + shape)
    };

    let wobble = slow_wobble(rng, 0.25);
    let burst = match class {
        2 => Some(rng.random_range(0.72..0.88)),
        3 => Some(rng.random_range(0.12..0.28)),
        _ => None,
    };
    let burst_gain = rng.random_range(2.5..4.0);
    let burst_width = rng.random_range(0.08..0.14);
    let envelope = |u: f64| -> f64 {
        let t = u * duration;
        let ramp = (t / 0.02).min((duration - t) / 0.02).clamp(0.0, 1.0);
        let bump = burst.map_or(0.0, |c| {
            (burst_gain - 1.0) * (-((u - c) / burst_width).powi(2) / 2.0).exp()
        });
        ramp * (1.0 + wobble(t)).max(0.1) * (1.0 + bump)
    };

    let mut phases = vec![0.0f64; 64];
    let mut clean = Vec::with_capacity(n);
    for i in 0..n {
        let u = i as f64 / n as f64;
        let pitch = log_f0(u).exp();
        let mut s = 0.0;
        let max_h = ((0.45 * sr) / pitch).floor() as usize;
        for (h, phase) in phases.iter_mut().enumerate().take(max_h.min(64)) {
            let freq = pitch * (h + 1) as f64;
            *phase += 2.0 * PI * freq / sr;
            if *phase > 2.0 * PI {
                *phase -= 2.0 * PI * (*phase / (2.0 * PI)).floor();
            }
            s += harmonic_gain(freq, u, h + 1) * phase.sin();
        }
        clean.push(s * envelope(u));
    }

    let rms = (clean.iter().map(|x| x * x).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-9);
    let snr_db: f64 = rng.random_range(15.0..30.0);
    let noise = Normal::new(0.0, rms * 10f64.powf(-snr_db / 20.0)).expect("positive std");
    let mut samples: Vec<f64> = clean.iter().map(|x| x + noise.sample(rng)).collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-9);
    let target = rng.random_range(0.3..0.8);
    samples.iter_mut().for_each(|x| *x *= target / peak);
    Waveform::new(samples, sample_rate).expect("finite synthetic audio")
}

fn split_index(split: Split) -> u64 {
    match split {
        Split::Train => 0,
        Split::Validation => 1,
        Split::Test => 2,
    }
}

/// All utterances of one split, classes interleaved. Each utterance has its
/// own random stream, so the result does not depend on thread count.
pub fn synth_split(cfg: &SynthConfig, split: Split) -> Vec<SynthUtterance> {
    let count = cfg.per_class(split) * SYNTH_CLASSES.len();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((split_index(split) << 32) | i as u64);
            let class = i % SYNTH_CLASSES.len();
            SynthUtterance {
                id: format!("{}_{i:05}", split.name()),
                class,
                wave: synth_utterance(class, &mut rng, cfg.sample_rate),
            }
        })
        .collect()
}

/// Writes the corpus as `wav/<split>/<id>.wav` plus one manifest per split
/// under `out_dir`, then loads it back.
pub fn synth_generate(cfg: &SynthConfig, out_dir: &Path) -> Result<CorpusManifests, DataError> {
    if cfg.train_per_class == 0 {
        return Err(DataError::Invalid("n_per_class must be at least 1".into()));
    }
    for split in Split::ALL {
        let rel_dir = Path::new("wav").join(split.name());
        let abs_dir = out_dir.join(&rel_dir);
        std::fs::create_dir_all(&abs_dir).map_err(|e| DataError::io(&abs_dir, e))?;
        let utterances = synth_split(cfg, split);
        utterances
            .par_iter()
            .try_for_each(|u| write_wav(&abs_dir.join(format!("{}.wav", u.id)), &u.wave))?;
        let manifest = Manifest {
            root: out_dir.to_path_buf(),
            entries: utterances
                .iter()
                .map(|u| ManifestEntry {
                    id: u.id.clone(),
                    audio_path: rel_dir.join(format!("{}.wav", u.id)),
                    raw_labels: vec![u.label().to_string()],
                })
                .collect(),
        };
        manifest.save(&out_dir.join(split.file_name()))?;
    }
    load_manifest(out_dir)
}
