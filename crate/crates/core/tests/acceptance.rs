//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pdac::data::{synth_split, Dataset, Split, SynthConfig};
use pdac::features::{track_pitch, PitchConfig, Waveform};
use pdac::model::{Ablation, Model, ModelConfig, ModelInput, PaddedBatch};
use pdac::numerics::Tensor;
use pdac::training::{evaluate, mann_whitney_u, run_protocol, train, TrainConfig, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_input(rng: &mut impl Rng, t: usize) -> ModelInput {
    let mut draw =
        |n: usize, lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
    let lfbe = Tensor::matrix(t, 40, draw(t * 40, -2.5, 2.5)).unwrap();
    let mut prosody = draw(t * 6, -1.0, 1.0);
    // Energy log-ratios are non-positive.
    for r in 0..t {
        for v in &mut prosody[r * 6..r * 6 + 3] {
            *v = -3.0 * v.abs();
        }
    }
    ModelInput::new(lfbe, Tensor::matrix(t, 6, prosody).unwrap()).unwrap()
}

fn max_logit_gap(a: &Model, b: &Model, inputs: &[ModelInput]) -> f64 {
    inputs
        .iter()
        .flat_map(|x| {
            let (la, lb) = (
                a.forward(x, false).unwrap().logits,
                b.forward(x, false).unwrap().logits,
            );
            la.into_iter()
                .zip(lb)
                .map(|(p, q)| (p - q).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let (model, input, target) = pdac::cli::selfcheck_fixture(0).map_err(|e| e.to_string())?;
    let report = model
        .gradient_check(&input, target, 1e-5, 1e-4, 1.0)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let failing: Vec<_> = report.failing().map(|p| p.name.clone()).collect();
    check(
        report.passed() && elapsed < Duration::from_secs(60) && report.params.len() == model.params().len(),
        format!(
            "{} tensors, max rel err {:.2e} (tol 1e-4), {:.2}s (< 60s), failing {failing:?}",
            report.params.len(),
            report.max_rel_error(),
            elapsed.as_secs_f64()
        ),
    )
}

fn gate_ranges() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_mean: f64 = 0.0;
    for pass in 0..1000 {
        // Fresh weights every 50 passes.
        let model = Model::new(ModelConfig::tiny(4), &mut ChaCha8Rng::seed_from_u64(pass / 50)).unwrap();
        let t = rng.random_range(5..40);
        let out = model.forward(&random_input(&mut rng, t), true).unwrap();
        let trace = out.trace.unwrap();
        trace
            .check_ranges(false)
            .map_err(|e| format!("pass {pass}: {e}"))?;
        for m in [&trace.similarity_centered, &trace.dissimilarity_centered] {
            let m = m.as_ref().ok_or("missing centred affinity")?;
            let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
            worst_mean = worst_mean.max(mean.abs());
        }
    }
    check(
        worst_mean <= 1e-9,
        format!("1000 passes in range; max |centred mean| {worst_mean:.1e} (tol 1e-9)"),
    )
}

fn reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs: Vec<ModelInput> = (0..20)
        .map(|_| {
            let t = rng.random_range(5..60);
            random_input(&mut rng, t)
        })
        .collect();

    // Saturated local gate against plain concatenation.
    let mut gated = Model::new(ModelConfig::tiny(4), &mut rng).unwrap();
    for name in ["local.w_p", "local.w_l", "local.w_lp", "local.b"] {
        let fill = if name == "local.b" { 30.0 } else { 0.0 };
        let id = gated.params().id(name).unwrap();
        gated.params_mut().value_mut(id).data_mut().fill(fill);
    }
    let concat_cfg = ModelConfig {
        ablation: Ablation::LocalConcat,
        ..ModelConfig::tiny(4)
    };
    let mut concat = Model::new(concat_cfg, &mut rng).unwrap();
    let copied = concat.copy_shared_from(&gated);
    if copied != concat.params().len() {
        return Err(format!(
            "concat shares {copied} of {} tensors",
            concat.params().len()
        ));
    }
    let gap_concat = max_logit_gap(&gated, &concat, &inputs);

    // Zeroed prosody embedding against the LFBE-only baseline.
    let cfg = ModelConfig::tiny(4);
    let (dp, half, hidden) = (cfg.prosody_embed_dim, cfg.lstm_hidden / 2, cfg.lstm_hidden);
    let base_cfg = ModelConfig {
        ablation: Ablation::Baseline,
        ..cfg.clone()
    };
    let baseline = Model::new(base_cfg, &mut rng).unwrap();
    let mut full = Model::new(cfg, &mut rng).unwrap();
    full.copy_shared_from(&baseline);
    let zero = |m: &mut Model, name: &str| {
        let id = m.params().id(name).unwrap();
        m.params_mut().value_mut(id).data_mut().fill(0.0);
    };
    zero(&mut full, "prosody.w");
    zero(&mut full, "prosody.b");
    let cnn_biases: Vec<String> = full
        .params()
        .iter()
        .filter(|p| p.name.starts_with("cnn.") && p.name.ends_with(".b"))
        .map(|p| p.name.clone())
        .collect();
    for name in &cnn_biases {
        zero(&mut full, name);
    }
    for dir in ["fwd", "bwd"] {
        let name = format!("encoder.l0.{dir}.w_ih");
        let src = baseline
            .params()
            .value(baseline.params().id(&name).unwrap())
            .clone();
        let id = full.params().id(&name).unwrap();
        let dst = full.params_mut().value_mut(id);
        for r in 0..src.rows() {
            dst.row_mut(dp + r).copy_from_slice(src.row(r));
        }
        debug_assert_eq!(src.cols(), 4 * half);
    }
    let src = baseline
        .params()
        .value(baseline.params().id("classifier.w").unwrap())
        .clone();
    let id = full.params().id("classifier.w").unwrap();
    for r in 0..hidden {
        full.params_mut()
            .value_mut(id)
            .row_mut(r)
            .copy_from_slice(src.row(r));
    }
    let gap_base = max_logit_gap(&full, &baseline, &inputs);

    check(
        gap_concat <= 1e-9 && gap_base <= 1e-9,
        format!("gate at +30 vs local_concat {gap_concat:.1e}; zeroed prosody vs baseline {gap_base:.1e} (tol 1e-9)"),
    )
}

fn padding_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = Model::new(ModelConfig::tiny(4), &mut rng).unwrap();
    let inputs: Vec<ModelInput> = (0..100)
        .map(|_| {
            let t = rng.random_range(10..=200);
            random_input(&mut rng, t)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for chunk in inputs.chunks(10) {
        let batch = PaddedBatch::new(&chunk.iter().collect::<Vec<_>>());
        let batched = model.forward_batch(&batch, false).unwrap();
        for (x, out) in chunk.iter().zip(&batched) {
            let single = model.forward(x, false).unwrap();
            for (a, b) in single.logits.iter().zip(&out.logits) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(
        worst <= 1e-5,
        format!("100 utterances, 10-200 frames, max gap {worst:.1e} (tol 1e-5)"),
    )
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        validation_per_class: 4,
        test_per_class: 4,
        ..SynthConfig::new(8, 5)
    };
    let data = Dataset::from_synth(&synth).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        lr: 1e-2,
        epochs: 60,
        batch_size: 8,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &ModelConfig::tiny(4), &data).map_err(|e| e.to_string())?;
    let acc = evaluate(&out.last, &data.train, &data.label_map)
        .map_err(|e| e.to_string())?
        .accuracy;
    let elapsed = start.elapsed();
    check(
        data.train.len() == 32 && acc >= 0.95 && elapsed < Duration::from_secs(300),
        format!(
            "{} utterances, train accuracy {acc:.3} after 60 epochs (>= 0.95), {:.1}s (< 300s)",
            data.train.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// The three ablation arms used by criteria 6 and 7.
struct Arms {
    full: TrainReport,
    local_concat: TrainReport,
    baseline: TrainReport,
}

fn protocol_arms() -> Result<Arms, String> {
    let synth = SynthConfig {
        validation_per_class: 16,
        test_per_class: 32,
        ..SynthConfig::new(64, 7)
    };
    let data = Dataset::from_synth(&synth).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        lr: 3e-3,
        epochs: 30,
        batch_size: 32,
        seed: 0,
        runs: 10,
        ..TrainConfig::default()
    };
    let arm = |ablation| {
        let mcfg = ModelConfig {
            ablation,
            lstm_hidden: 8,
            ..ModelConfig::tiny(4)
        };
        run_protocol(&cfg, &mcfg, &data, None).map_err(|e| e.to_string())
    };
    Ok(Arms {
        full: arm(Ablation::Full)?,
        local_concat: arm(Ablation::LocalConcat)?,
        baseline: arm(Ablation::Baseline)?,
    })
}

fn separation(arms: &Arms) -> Outcome {
    let (f, b) = (arms.full.test_accuracies(), arms.baseline.test_accuracies());
    let mw = mann_whitney_u(&f, &b).map_err(|e| e.to_string())?;
    let (mf, mb) = (arms.full.aggregate.mean, arms.baseline.aggregate.mean);
    check(
        f.len() == 10 && mf > mb && mw.p_value < 0.05,
        format!(
            "full {mf:.4} vs baseline {mb:.4} over 10 runs, U {} two-sided p {:.2e} (< 0.05)",
            mw.u_a, mw.p_value
        ),
    )
}

fn ordering(arms: &Arms) -> Outcome {
    let (f, c, b) = (
        arms.full.aggregate.mean,
        arms.local_concat.aggregate.mean,
        arms.baseline.aggregate.mean,
    );
    check(
        f >= c && c >= b,
        format!("full {f:.4} >= local_concat {c:.4} >= baseline {b:.4}"),
    )
}

fn mann_whitney_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for na in 1..=8 {
        for nb in 1..=8 {
            for rep in 0..3 {
                // Coarse values force ties on some repetitions.
                let levels = if rep == 0 { 4 } else { 1000 };
                let mut draw =
                    |n| -> Vec<f64> { (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect() };
                let (a, b) = (draw(na), draw(nb));
                let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                if r.u_a + r.u_b != (na * nb) as f64 {
                    return Err(format!("U_a + U_b = {} for {na}x{nb}", r.u_a + r.u_b));
                }
                worst = worst.max((r.p_value - common::brute_force_p(&a, &b).0).abs());
            }
        }
    }
    check(
        worst <= 1e-9,
        format!("all sizes 1..=8 squared, max |p - enumeration| {worst:.1e} (tol 1e-9)"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn pitch_oracle() -> Outcome {
    let cfg = PitchConfig::default();
    let mut tones = Vec::new();
    for hz in [200.0, 300.0] {
        let samples = (0..8000)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * hz * i as f64 / 8000.0).sin())
            .collect();
        let wave = Waveform::new(samples, 8000).map_err(|e| e.to_string())?;
        let track = track_pitch(&wave, 25.0, 10.0, &cfg).map_err(|e| e.to_string())?;
        let m = median(track.pitch_hz.clone());
        if (m / hz - 1.0).abs() > 0.05 {
            return Err(format!("{hz} Hz tone tracked at {m:.1} Hz"));
        }
        tones.push(m);
    }
    let items = synth_split(&SynthConfig::new(40, 9), Split::Train);
    let rising: Vec<_> = items.iter().filter(|u| u.label() == "rising").collect();
    let positive = rising
        .iter()
        .filter(|u| {
            let track = track_pitch(&u.wave, 25.0, 10.0, &cfg).unwrap();
            let pts: Vec<(f64, f64)> = track
                .log_pitch()
                .into_iter()
                .enumerate()
                .filter(|&(i, _)| track.pov[i] > 0.5)
                .map(|(i, y)| (i as f64, y))
                .collect();
            common::slope(&pts) > 0.0
        })
        .count();
    check(
        positive as f64 >= 0.95 * rising.len() as f64,
        format!(
            "tones at {:.1}/{:.1} Hz (±5%), rising slope positive in {positive}/{} (>= 95%)",
            tones[0],
            tones[1],
            rising.len()
        ),
    )
}

fn determinism() -> Outcome {
    let data = Dataset::from_synth(&SynthConfig::new(6, 10)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        seed: 11,
        ..TrainConfig::default()
    };
    let report = || {
        train(&cfg, &ModelConfig::tiny(4), &data)
            .map(|o| o.report(&cfg).to_json())
            .map_err(|e| e.to_string())
    };
    let (a, b) = (report()?, report()?);
    check(
        a.as_bytes() == b.as_bytes(),
        format!(
            "two runs, {} bytes of report JSON, identical: {}",
            a.len(),
            a == b
        ),
    )
}

fn main() -> ExitCode {
    let mut arms = None;
    let mut failures = 0;
    for n in 1..=10 {
        let outcome = match n {
            1 => gradient_suite(),
            2 => gate_ranges(),
            3 => reductions(),
            4 => padding_invariance(),
            5 => overfit(),
            6 | 7 => {
                let arms = arms.get_or_insert_with(protocol_arms);
                match arms {
                    Ok(a) if n == 6 => separation(a),
                    Ok(a) => ordering(a),
                    Err(e) => Err(e.clone()),
                }
            }
            8 => mann_whitney_exactness(),
            9 => pitch_oracle(),
            _ => determinism(),
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {n}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {n}: {detail}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
