use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, evenly spaced in mel between
/// `f_min` and `f_max`, applied to a one-sided power spectrum.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// Sparse weights per filter: `(fft_bin, weight)`.
    filters: Vec<Vec<(usize, f64)>>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Self {
        let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_lo + step * i as f64).collect();
        let n_bins = fft_size / 2 + 1;
        let bin_mel: Vec<f64> = (0..n_bins)
            .map(|k| hz_to_mel(k as f64 * sample_rate as f64 / fft_size as f64))
            .collect();

        let filters = (0..n_mels)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                bin_mel
                    .iter()
                    .enumerate()
                    .filter_map(|(k, &mel)| {
                        let w = if mel > left && mel <= center {
                            (mel - left) / (center - left)
                        } else if mel > center && mel < right {
                            (right - mel) / (right - center)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        let centers_hz = (0..n_mels).map(|m| mel_to_hz(edges[m + 1])).collect();
        Self { filters, centers_hz }
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn filter_weight_sum(&self, m: usize) -> f64 {
        self.filters[m].iter().map(|(_, w)| w).sum()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|f| f.iter().map(|&(k, w)| w * power[k]).sum())
            .collect()
    }
}

/// Zero-padded FFT power spectrum of real frames.
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    size: usize,
}

impl PowerSpectrum {
    pub fn new(size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(size);
        Self { fft, size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `|X[k]|²` for `k = 0..=size/2`. Frames longer than the FFT size are
    /// truncated.
    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = (0..self.size)
            .map(|i| Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..self.size / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }
}
