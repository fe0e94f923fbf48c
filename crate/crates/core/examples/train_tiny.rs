//! Trains a small gated model on the synthetic corpus and saves the best
//! checkpoint.
//!
//! `cargo run --release --example train_tiny [-- epochs]`

use pdac::data::{Dataset, SynthConfig};
use pdac::model::ModelConfig;
use pdac::training::{train, ModelBundle, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map_or(Ok(15), |s| s.parse())?;
    let data = Dataset::from_synth(&SynthConfig::new(24, 1))?;
    let cfg = TrainConfig {
        lr: 3e-3,
        epochs,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &ModelConfig::tiny(data.label_map.len()), &data)?;
    for e in &out.result.epochs {
        println!(
            "epoch {:>3}  train loss {:.4}  val loss {:.4}  val acc {:.3}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy
        );
    }
    let test = &out.result.test;
    println!(
        "best epoch {}  test accuracy {:.3}",
        out.result.best_epoch, test.accuracy
    );
    for (label, acc) in &test.per_class_accuracy {
        println!("  {label:<12} {acc:.3}");
    }
    let path = std::env::temp_dir().join("pdac_train_tiny.ckpt");
    out.best.save(&path)?;
    let reloaded = ModelBundle::load(&path)?;
    println!(
        "checkpoint {} ({} params)",
        path.display(),
        reloaded.model.param_count()
    );
    Ok(())
}
