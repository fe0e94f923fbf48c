use std::f64::consts::PI;

use super::{FeatureError, Waveform};

/// Samples covering `ms` milliseconds at `sample_rate`, rounded.
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Number of complete windows of `window` samples at stride `hop`.
pub fn frame_count(n_samples: usize, window: usize, hop: usize) -> usize {
    if n_samples < window {
        0
    } else {
        (n_samples - window) / hop + 1
    }
}

pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Splits the waveform into Hamming-windowed frames. Frame `k` starts at
/// sample `k · hop`; trailing samples that do not fill a window are dropped.
pub fn frame_signal(wave: &Waveform, window_ms: f64, hop_ms: f64) -> Result<Vec<Vec<f64>>, FeatureError> {
    if !(hop_ms > 0.0 && window_ms >= hop_ms) {
        return Err(FeatureError::InvalidConfig(format!(
            "need window_ms ≥ hop_ms > 0, got {window_ms}/{hop_ms}"
        )));
    }
    let window = ms_to_samples(window_ms, wave.sample_rate);
    let hop = ms_to_samples(hop_ms, wave.sample_rate).max(1);
    let n = frame_count(wave.samples.len(), window, hop);
    if n == 0 {
        return Err(FeatureError::UtteranceTooShort {
            samples: wave.samples.len(),
            window,
        });
    }
    let taper = hamming(window);
    Ok((0..n)
        .map(|k| {
            wave.samples[k * hop..k * hop + window]
                .iter()
                .zip(&taper)
                .map(|(x, w)| x * w)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn silent(n: usize) -> Waveform {
        Waveform::new(vec![0.0; n], 8000).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let frames = frame_signal(&silent(8000), 25.0, 10.0).unwrap();
        assert_eq!(frames.len(), 98);
        assert!(frames.iter().all(|f| f.len() == 200));
    }

    #[test]
    fn exactly_one_window() {
        assert_eq!(frame_signal(&silent(200), 25.0, 10.0).unwrap().len(), 1);
    }

    #[test]
    fn shorter_than_window_is_rejected() {
        let err = frame_signal(&silent(199), 25.0, 10.0).unwrap_err();
        assert!(matches!(
            err,
            FeatureError::UtteranceTooShort {
                samples: 199,
                window: 200
            }
        ));
    }

    #[test]
    fn hamming_endpoints() {
        let w = hamming(200);
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[199] - 0.08).abs() < 1e-12);
    }
}
