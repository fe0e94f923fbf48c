use std::sync::OnceLock;

use pdac::data::{Dataset, Example, LabelMap, SynthConfig};
use pdac::model::{Ablation, Model, ModelConfig};
use pdac::training::{evaluate, run_protocol, train, ModelBundle, TrainConfig, TrainError, TrainReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_data() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| Dataset::from_synth(&SynthConfig::new(4, 21)).unwrap())
}

fn quick(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        lr,
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let data = small_data();
    let mcfg = ModelConfig::tiny(4);
    let out = train(&quick(1, 0.0), &mcfg, data).unwrap();
    let init = Model::new(mcfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for (a, b) in init.params().iter().zip(out.last.params().iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.value, b.value, "{}", a.name);
    }
}

#[test]
fn huge_step_reports_divergence() {
    let err = train(&quick(2, 1e300), &ModelConfig::tiny(4), small_data()).unwrap_err();
    assert!(matches!(err, TrainError::DivergedAtStep(_)), "{err}");
}

#[test]
fn uniform_guessing_scores_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hits = (0..500).filter(|&i| rng.random_range(0..4usize) == i % 4).count();
    let acc = hits as f64 / 500.0;
    assert!((acc - 0.25).abs() <= 0.08, "{acc}");
}

#[test]
fn confusion_rows_match_class_counts() {
    let data = small_data();
    let out = train(&quick(2, 3e-3), &ModelConfig::tiny(4), data).unwrap();
    let eval = &out.result.test;
    let names = data.label_map.names();
    for (row, label) in eval.confusion.row_sums().iter().zip(names) {
        let n = data.test.iter().filter(|e| &e.label == label).count();
        assert_eq!(*row, n);
        assert_eq!(eval.class_counts[label], n);
    }
    let weighted: f64 = eval
        .per_class_accuracy
        .iter()
        .map(|(l, a)| a * eval.class_counts[l] as f64)
        .sum::<f64>()
        / eval.n_items as f64;
    assert!((weighted - eval.accuracy).abs() < 1e-12);
}

#[test]
fn scoring_the_model_against_itself_is_perfect() {
    let data = small_data();
    let model = Model::new(ModelConfig::tiny(4), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let relabelled: Vec<Example> = data
        .test
        .iter()
        .map(|e| {
            let p = model.forward(&e.input, false).unwrap().predicted();
            Example {
                target: Some(p),
                label: data.label_map.name(p).to_string(),
                ..e.clone()
            }
        })
        .collect();
    assert_eq!(
        evaluate(&model, &relabelled, &data.label_map).unwrap().accuracy,
        1.0
    );
}

#[test]
fn unknown_test_labels_count_as_errors() {
    let data = small_data();
    let model = Model::new(ModelConfig::tiny(4), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut items = data.test.clone();
    items[0].target = None;
    items[0].label = "<unk>".into();
    let eval = evaluate(&model, &items, &data.label_map).unwrap();
    assert_eq!(eval.confusion.gold_labels.last().unwrap(), "<unk>");
    assert_eq!(eval.per_class_accuracy["<unk>"], 0.0);
    assert_eq!(eval.confusion.row_sums().iter().sum::<usize>(), items.len());
}

#[test]
fn label_map_size_must_match_classifier() {
    let model = Model::new(ModelConfig::tiny(3), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let map = LabelMap::from_labels(["a", "b", "c", "d"]);
    assert!(matches!(
        evaluate(&model, &small_data().test, &map),
        Err(TrainError::LabelMapMismatch { .. })
    ));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let data = small_data();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..quick(3, 3e-3)
    };
    let out = train(&cfg, &ModelConfig::tiny(4), data).unwrap();
    let path = out.result.checkpoint.clone().unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    assert_eq!(loaded.label_map, out.best.label_map);
    assert_eq!(loaded.normalizer, out.best.normalizer);
    for (a, b) in out.best.model.params().iter().zip(loaded.model.params().iter()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
    for ex in &data.test {
        assert_eq!(
            out.best.model.forward(&ex.input, false).unwrap().logits,
            loaded.model.forward(&ex.input, false).unwrap().logits
        );
    }
    let again = evaluate(&loaded.model, &data.test, &loaded.label_map).unwrap();
    assert_eq!(again, out.result.test);
}

#[test]
fn same_seed_same_report() {
    let data = small_data();
    let a = train(&quick(2, 3e-3), &ModelConfig::tiny(4), data).unwrap();
    let b = train(&quick(2, 3e-3), &ModelConfig::tiny(4), data).unwrap();
    let cfg = quick(2, 3e-3);
    assert_eq!(a.report(&cfg).to_json(), b.report(&cfg).to_json());
    let c = train(
        &TrainConfig {
            seed: 4,
            ..cfg.clone()
        },
        &ModelConfig::tiny(4),
        data,
    )
    .unwrap();
    assert_ne!(a.report(&cfg).runs[0].epochs, c.report(&cfg).runs[0].epochs);
}

#[test]
fn protocol_collects_one_accuracy_per_run() {
    let data = small_data();
    let cfg = TrainConfig {
        runs: 10,
        ..quick(1, 3e-3)
    };
    let base = run_protocol(&cfg, &ModelConfig::tiny(4), data, None).unwrap();
    assert_eq!(base.test_accuracies().len(), 10);
    assert_eq!(
        base.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        (3..13).collect::<Vec<u64>>()
    );
    let same = run_protocol(&cfg, &ModelConfig::tiny(4), data, Some(&base)).unwrap();
    assert_eq!(same.significance.as_ref().unwrap().p_value, 1.0);
    let parsed = TrainReport::from_json(&same.to_json()).unwrap();
    assert_eq!(parsed, same);
}

#[test]
fn reports_are_tagged_by_ablation() {
    let data = small_data();
    let mcfg = ModelConfig {
        ablation: Ablation::Baseline,
        ..ModelConfig::tiny(4)
    };
    let out = train(&quick(1, 3e-3), &mcfg, data).unwrap();
    assert_eq!(out.report(&quick(1, 3e-3)).tag, "baseline");
}

#[test]
fn metrics_csv_has_one_row_per_epoch() {
    let out = train(&quick(3, 3e-3), &ModelConfig::tiny(4), small_data()).unwrap();
    let csv = out.result.metrics_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss,val_acc");
    assert_eq!(lines.len(), 4);
    assert!((1..=3).contains(&out.result.best_epoch));
}
