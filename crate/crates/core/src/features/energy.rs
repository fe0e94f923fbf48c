/// Three per-frame energy features from the pre-log mel energies of a whole
/// utterance:
///
/// 0. `log(total / max_total)` with the max taken over the utterance,
/// 1. `log(lower-half bands / total)`,
/// 2. `log(upper-half bands / total)`.
///
/// Ratios are floored at `floor` before the log; a zero denominator counts
/// as a zero ratio.
pub fn extract_energy(mel_energies: &[Vec<f64>], floor: f64) -> Vec<[f64; 3]> {
    let totals: Vec<f64> = mel_energies.iter().map(|f| f.iter().sum()).collect();
    let max_total = totals.iter().cloned().fold(0.0, f64::max);
    let ratio_log = |num: f64, den: f64| {
        let r = if den > 0.0 { num / den } else { 0.0 };
        r.max(floor).ln()
    };
    mel_energies
        .iter()
        .zip(&totals)
        .map(|(bands, &total)| {
            let half = bands.len() / 2;
            let low: f64 = bands[..half].iter().sum();
            let high: f64 = bands[half..].iter().sum();
            [
                ratio_log(total, max_total),
                ratio_log(low, total),
                ratio_log(high, total),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOOR: f64 = 1e-10;

    #[test]
    fn loudest_frame_is_zero() {
        let frames = vec![vec![1.0; 40], vec![3.0; 40], vec![0.5; 40]];
        let e = extract_energy(&frames, FLOOR);
        assert_eq!(e[1][0], 0.0);
        assert!((e[0][0] - (1.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn balanced_bands_give_half() {
        let mut bands = vec![2.0; 20];
        bands.extend(vec![0.5; 20]);
        bands[25] = 0.5 + 30.0;
        let e = extract_energy(&[bands], FLOOR);
        assert!((e[0][1] - 0.5f64.ln()).abs() < 1e-9);
        assert!((e[0][2] - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn silence_hits_the_floor() {
        let e = extract_energy(&[vec![0.0; 40], vec![0.0; 40]], FLOOR);
        for row in e {
            for v in row {
                assert_eq!(v, FLOOR.ln());
            }
        }
    }
}
