use std::fs;
use std::path::Path;

use pdac::cli::{labels_path, run, CliError};
use pdac::training::TrainReport;

fn pdac(args: &[&str]) -> Result<(), CliError> {
    run(std::iter::once("pdac").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: [&str; 16] = [
    "--set",
    "prosody_embed_dim=4",
    "--set",
    "lstm_layers=1",
    "--set",
    "lstm_hidden=8",
    "--set",
    "cnn_filters_per_kernel=3",
    "--set",
    "affinity_dim=8",
    "--set",
    "epochs=2",
    "--set",
    "batch_size=4",
    "--set",
    "lr=0.003",
];

#[test]
fn every_subcommand_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    pdac(&["synth", "--n", "3", "--seed", "5", "--out", s(&corpus)]).unwrap();
    assert!(corpus.join("train.tsv").exists());

    let cache = tmp.path().join("test.feat");
    pdac(&[
        "extract",
        "--manifest",
        s(&corpus.join("test.tsv")),
        "--out",
        s(&cache),
    ])
    .unwrap();
    assert!(fs::metadata(&cache).unwrap().len() > 0);

    let run_dir = tmp.path().join("run");
    let mut args = vec!["train", "--data", s(&corpus), "--out", s(&run_dir)];
    args.extend(TINY);
    pdac(&args).unwrap();
    for f in ["report.json", "metrics.csv", "model.ckpt"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let report = TrainReport::from_json(&fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.runs[0].epochs.len(), 2);

    let ckpt = run_dir.join("model.ckpt");
    let eval = tmp.path().join("eval.json");
    pdac(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&corpus),
        "--out",
        s(&eval),
    ])
    .unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(parsed["n_items"], 8);

    let gates = tmp.path().join("gates.jsonl");
    pdac(&[
        "inspect-gates",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&corpus.join("test.tsv")),
        "--out",
        s(&gates),
    ])
    .unwrap();
    assert_eq!(fs::read_to_string(&gates).unwrap().lines().count(), 8);
    assert!(labels_path(&gates).exists());

    let proto = tmp.path().join("proto");
    let mut args = vec![
        "protocol",
        "--data",
        s(&corpus),
        "--runs",
        "2",
        "--out",
        s(&proto),
    ];
    args.extend(TINY);
    let reference = run_dir.join("report.json");
    args.extend(["--reference", s(&reference)]);
    pdac(&args).unwrap();
    let report = TrainReport::from_json(&fs::read_to_string(proto.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert!(report.significance.is_some());

    pdac(&["selfcheck"]).unwrap();
    assert!(matches!(
        pdac(&["selfcheck", "--corrupt-gradient"]),
        Err(CliError::SelfCheckFailed(_))
    ));
}

#[test]
fn bad_override_is_a_usage_error() {
    let err = pdac(&["train", "--data", "nowhere", "--out", "x", "--set", "nonsense=1"]).unwrap_err();
    assert!(err.to_string().contains("unknown config key"), "{err}");
}
