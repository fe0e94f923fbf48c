//! NCCF pitch tracker with Viterbi smoothing.
//!
//! Per frame the normalized cross-correlation is evaluated at every integer
//! lag in the search range; local maxima are refined by parabolic
//! interpolation. A Viterbi pass over the lag states then picks the path
//! minimising `Σ (1 − warped_nccf) + w · |log(lag_t / lag_{t−1})|`, where
//! `warped_nccf = nccf − bias · lag` favours the shortest period among
//! equally periodic candidates (suppressing sub-octave errors).

use serde::{Deserialize, Serialize};

use super::frame::{frame_count, ms_to_samples};
use super::{FeatureError, Waveform};

const NCCF_BALLAST: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Lag-dependent bias subtracted from the NCCF, per sample of lag.
    pub lag_bias: f64,
    /// Viterbi transition cost per unit of |Δ log lag|.
    pub transition_weight: f64,
    /// Width of the centred POV-weighted mean window, seconds.
    pub mean_window_s: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 400.0,
            lag_bias: 1e-4,
            transition_weight: 0.5,
            mean_window_s: 1.5,
        }
    }
}

/// Raw tracker output, one entry per frame.
#[derive(Clone, Debug, Default)]
pub struct PitchTrack {
    pub pitch_hz: Vec<f64>,
    /// NCCF at the selected lag (parabolically refined).
    pub nccf: Vec<f64>,
    /// NCCF after the lag bias; this is pitch feature 0.
    pub warped_nccf: Vec<f64>,
    /// Probability-of-voicing proxy, `max(0, nccf)`.
    pub pov: Vec<f64>,
}

impl PitchTrack {
    pub fn log_pitch(&self) -> Vec<f64> {
        self.pitch_hz.iter().map(|p| p.ln()).collect()
    }

    pub fn len(&self) -> usize {
        self.pitch_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch_hz.is_empty()
    }
}

struct Candidate {
    value: f64,
    lag: f64,
}

/// NCCF at every integer lag in `lags` for the segment starting at `start`.
/// Both the reference window and each lagged window are mean-centred.
/// Samples past the end of the signal read as zero.
fn nccf_row(signal: &[f64], start: usize, len: usize, lags: (usize, usize)) -> Vec<f64> {
    let (lag_min, lag_max) = lags;
    let seg: Vec<f64> = (start..start + len + lag_max)
        .map(|i| signal.get(i).copied().unwrap_or(0.0))
        .collect();
    let n = len as f64;
    let head_mean = seg[..len].iter().sum::<f64>() / n;
    let head: Vec<f64> = seg[..len].iter().map(|x| x - head_mean).collect();
    let e1: f64 = head.iter().map(|x| x * x).sum();
    (lag_min..=lag_max)
        .map(|lag| {
            let tail = &seg[lag..lag + len];
            // Σ head = 0, so centring the tail does not change the cross term.
            let cross: f64 = head.iter().zip(tail).map(|(a, b)| a * b).sum();
            let sum: f64 = tail.iter().sum();
            let e2 = (tail.iter().map(|x| x * x).sum::<f64>() - sum * sum / n).max(0.0);
            cross / (e1 * e2 + NCCF_BALLAST).sqrt()
        })
        .collect()
}

fn refine(row: &[f64], lag_min: usize) -> Vec<Candidate> {
    (0..row.len())
        .map(|i| {
            let y0 = row[i];
            let lag = (lag_min + i) as f64;
            if i == 0 || i + 1 == row.len() || y0 < row[i - 1] || y0 < row[i + 1] {
                return Candidate { value: y0, lag };
            }
            let (ym, yp) = (row[i - 1], row[i + 1]);
            let denom = ym - 2.0 * y0 + yp;
            if denom >= 0.0 {
                return Candidate { value: y0, lag };
            }
            let delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            Candidate {
                value: y0 - 0.25 * (ym - yp) * delta,
                lag: lag + delta,
            }
        })
        .collect()
}

/// Runs the tracker on the same 25 ms / 10 ms grid as the spectral features.
pub fn track_pitch(
    wave: &Waveform,
    window_ms: f64,
    hop_ms: f64,
    cfg: &PitchConfig,
) -> Result<PitchTrack, FeatureError> {
    let sr = wave.sample_rate as f64;
    let window = ms_to_samples(window_ms, wave.sample_rate);
    let hop = ms_to_samples(hop_ms, wave.sample_rate).max(1);
    let n_frames = frame_count(wave.samples.len(), window, hop);
    if n_frames == 0 {
        return Err(FeatureError::UtteranceTooShort {
            samples: wave.samples.len(),
            window,
        });
    }
    let lag_min = ((sr / cfg.max_hz).floor() as usize).max(1);
    let lag_max = (sr / cfg.min_hz).ceil() as usize;
    if lag_max <= lag_min {
        return Err(FeatureError::InvalidConfig(format!(
            "empty pitch search range {}–{} Hz",
            cfg.min_hz, cfg.max_hz
        )));
    }
    let n_states = lag_max - lag_min + 1;

    let candidates: Vec<Vec<Candidate>> = (0..n_frames)
        .map(|k| {
            refine(
                &nccf_row(&wave.samples, k * hop, window, (lag_min, lag_max)),
                lag_min,
            )
        })
        .collect();
    let local_cost = |c: &Candidate| 1.0 - (c.value - cfg.lag_bias * c.lag);
    let log_lag: Vec<f64> = (lag_min..=lag_max).map(|l| (l as f64).ln()).collect();

    let mut cost: Vec<f64> = candidates[0].iter().map(local_cost).collect();
    let mut back: Vec<Vec<u16>> = Vec::with_capacity(n_frames);
    back.push(vec![0; n_states]);
    for frame in &candidates[1..] {
        let mut next = vec![0.0; n_states];
        let mut arg = vec![0u16; n_states];
        for s in 0..n_states {
            let mut best = f64::INFINITY;
            let mut best_prev = 0;
            for p in 0..n_states {
                let c = cost[p] + cfg.transition_weight * (log_lag[s] - log_lag[p]).abs();
                if c < best {
                    best = c;
                    best_prev = p;
                }
            }
            next[s] = best + local_cost(&frame[s]);
            arg[s] = best_prev as u16;
        }
        cost = next;
        back.push(arg);
    }
    let mut state = (0..n_states)
        .min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
        .expect("non-empty state space");
    let mut path = vec![0; n_frames];
    for t in (0..n_frames).rev() {
        path[t] = state;
        state = back[t][state] as usize;
    }

    let mut track = PitchTrack::default();
    for (t, &s) in path.iter().enumerate() {
        let c = &candidates[t][s];
        track.pitch_hz.push(sr / c.lag);
        track.nccf.push(c.value);
        track.warped_nccf.push(c.value - cfg.lag_bias * c.lag);
        track.pov.push(c.value.max(0.0));
    }
    Ok(track)
}

/// Turns a raw track into the three per-frame pitch features:
/// warped NCCF, POV-weighted mean-normalised log pitch, and the centred
/// derivative of raw log pitch.
pub fn pitch_features(track: &PitchTrack, hop_ms: f64, mean_window_s: f64) -> Vec<[f64; 3]> {
    let n = track.len();
    let log_pitch = track.log_pitch();
    let half = ((mean_window_s * 1000.0 / hop_ms) / 2.0).round() as usize;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let weight: f64 = track.pov[lo..=hi].iter().sum();
            let mean = if weight < 1e-6 {
                log_pitch[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            } else {
                log_pitch[lo..=hi]
                    .iter()
                    .zip(&track.pov[lo..=hi])
                    .map(|(p, w)| p * w)
                    .sum::<f64>()
                    / weight
            };
            let delta = match n {
                1 => 0.0,
                _ if i == 0 => log_pitch[1] - log_pitch[0],
                _ if i == n - 1 => log_pitch[n - 1] - log_pitch[n - 2],
                _ => 0.5 * (log_pitch[i + 1] - log_pitch[i - 1]),
            };
            [track.warped_nccf[i], log_pitch[i] - mean, delta]
        })
        .collect()
}

pub fn extract_pitch(
    wave: &Waveform,
    window_ms: f64,
    hop_ms: f64,
    cfg: &PitchConfig,
) -> Result<Vec<[f64; 3]>, FeatureError> {
    let track = track_pitch(wave, window_ms, hop_ms, cfg)?;
    Ok(pitch_features(&track, hop_ms, cfg.mean_window_s))
}
