//! LFBE, energy and pitch features for a WAV file, or for a synthetic
//! rising tone when no path is given.
//!
//! `cargo run --example extract_features [-- path/to/file.wav]`

use pdac::data::read_wav;
use pdac::features::{extract_features, Waveform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wave = match std::env::args().nth(1) {
        Some(path) => read_wav(path.as_ref())?,
        None => {
            let sr = 8000;
            let samples = (0..sr)
                .scan(0.0f64, |phase, i| {
                    let hz = 150.0 + 100.0 * i as f64 / sr as f64;
                    *phase += 2.0 * std::f64::consts::PI * hz / sr as f64;
                    Some(0.4 * phase.sin())
                })
                .collect();
            Waveform::new(samples, sr as u32)?
        }
    };
    let seq = extract_features(&wave)?;
    println!("{:.2}s -> {} frames", wave.duration_s(), seq.n_frames());
    println!("frame  lfbe[0]  lfbe[39]  e_total  e_low  e_high  nccf    logf0   dlogf0");
    for (i, f) in seq.frames.iter().enumerate().step_by(10) {
        println!(
            "{i:>5}  {:>7.2}  {:>8.2}  {:>7.2}  {:>5.2}  {:>6.2}  {:>5.2}  {:>6.3}  {:>6.3}",
            f.lfbe[0], f.lfbe[39], f.energy[0], f.energy[1], f.energy[2], f.pitch[0], f.pitch[1], f.pitch[2]
        );
    }
    Ok(())
}
