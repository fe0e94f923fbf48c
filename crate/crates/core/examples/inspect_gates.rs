//! Trains briefly, then writes per-utterance gate summaries for the test
//! split through the same path as `pdac inspect-gates`.

use pdac::data::{synth_generate, Dataset, Split, SynthConfig};
use pdac::model::ModelConfig;
use pdac::training::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pdac_inspect_gates");
    let synth = SynthConfig::new(8, 2);
    synth_generate(&synth, &dir)?;
    let data = Dataset::from_synth(&synth)?;
    let cfg = TrainConfig {
        lr: 3e-3,
        epochs: 5,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &ModelConfig::tiny(4), &data)?;
    let ckpt = dir.join("model.ckpt");
    out.best.save(&ckpt)?;

    let jsonl = dir.join("gates.jsonl");
    pdac::cli::cmd_inspect_gates(&ckpt, &dir.join(Split::Test.file_name()), &jsonl)?;
    for line in std::fs::read_to_string(&jsonl)?.lines().take(3) {
        println!("{}", &line[..line.len().min(160)]);
    }
    println!("per-label summary: {}", pdac::cli::labels_path(&jsonl).display());
    Ok(())
}
