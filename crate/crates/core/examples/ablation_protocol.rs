//! Repeated-run comparison of the full model against the LFBE-only
//! baseline, with a Mann-Whitney test on the test accuracies.
//!
//! `cargo run --release --example ablation_protocol [-- runs]`

use pdac::data::{Dataset, SynthConfig};
use pdac::model::{Ablation, ModelConfig};
use pdac::training::{run_protocol, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let data = Dataset::from_synth(&SynthConfig::new(32, 7))?;
    let cfg = TrainConfig {
        lr: 3e-3,
        epochs: 20,
        batch_size: 32,
        runs,
        ..TrainConfig::default()
    };
    let arm = |ablation| ModelConfig {
        ablation,
        lstm_hidden: 8,
        ..ModelConfig::tiny(4)
    };
    let baseline = run_protocol(&cfg, &arm(Ablation::Baseline), &data, None)?;
    for ablation in [Ablation::Baseline, Ablation::LocalConcat, Ablation::Full] {
        let report = match ablation {
            Ablation::Baseline => baseline.clone(),
            _ => run_protocol(&cfg, &arm(ablation), &data, Some(&baseline))?,
        };
        let agg = &report.aggregate;
        print!("{:<14} {:.4} ± {:.4}", report.tag, agg.mean, agg.std);
        if let Some(sig) = &report.significance {
            print!(
                "  vs {}: U {} p {:.3e}",
                sig.reference, sig.u_statistic, sig.p_value
            );
        }
        println!();
    }
    Ok(())
}
