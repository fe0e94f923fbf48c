//! One forward pass per ablation over a synthetic utterance, with the gate
//! trace summarised.

use pdac::data::{Dataset, SynthConfig};
use pdac::model::{Ablation, Model, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::from_synth(&SynthConfig::new(1, 4))?;
    let example = &data.train[0];
    println!(
        "utterance {} ({}), {} frames",
        example.id,
        example.label,
        example.input.len()
    );
    for ablation in Ablation::ALL {
        let cfg = ModelConfig {
            ablation,
            ..ModelConfig::tiny(4)
        };
        let model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(1))?;
        let out = model.forward(&example.input, true)?;
        let trace = out.trace.unwrap_or_default();
        let beta = trace
            .beta_summary()
            .map_or("-".to_string(), |b| format!("{:.3}..{:.3}", b.min, b.max));
        let score = trace.global_score.as_ref().map_or("-".to_string(), |s| {
            let (lo, hi) = s
                .data()
                .iter()
                .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            format!("{lo:.3}..{hi:.3}")
        });
        println!(
            "{:<20} params {:>6}  p(max) {:.3}  beta {beta:<13}  global {score}",
            ablation.name(),
            model.param_count(),
            out.probs.iter().copied().fold(0.0, f64::max)
        );
    }
    Ok(())
}
