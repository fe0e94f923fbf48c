//! The `pdac` command-line front end.
//!
//! Every subcommand is a thin wrapper over the library; [`run`] returns an
//! error instead of exiting so it can be driven from tests.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{apply_overrides, override_keys, RunConfig};

use crate::data::{featurize, synth_generate, DataError, Dataset, Manifest, Split, SynthConfig};
use crate::features::{cache, FeatureConfig, FeatureError, Frontend};
use crate::model::{GateAccumulator, LocalFusion, Model, ModelConfig, ModelError, ModelInput};
use crate::numerics::{NumericsError, Tensor};
use crate::training::{evaluate, run_protocol, train, ModelBundle, TrainError, TrainReport};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "PDAC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("gradient self-check failed: {0}")]
    SelfCheckFailed(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pdac",
    version,
    about = "Prosody-gated dialogue-act classification from raw audio"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract LFBE, energy and pitch features for every manifest entry
    /// into a binary cache.
    Extract {
        /// Manifest TSV (`id`, `audio_path`, `labels`).
        #[arg(long)]
        manifest: PathBuf,
        /// Output cache file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic prosody-labelled corpus (WAVs plus manifests).
    Synth {
        /// Items per class in the training split.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Items per class in the validation and test splits
        /// (default: half of `--n`, rounded up).
        #[arg(long)]
        held_out: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write `report.json`, `metrics.csv` and
    /// `model.ckpt` under `--out`.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on one split of a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus directory with `train.tsv`, `validation.tsv`, `test.tsv`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Write the evaluation JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train `--runs` models with consecutive seeds and aggregate their test
    /// accuracy, optionally testing against a reference report.
    Protocol {
        #[command(flatten)]
        run: RunArgs,
        /// Number of runs (overrides the config).
        #[arg(long)]
        runs: Option<usize>,
        /// `report.json` of the arm to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-utterance gate traces as JSON lines plus per-label
    /// histograms in `<out>.labels.json`.
    InspectGates {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every gradient of a tiny full model.
    Selfcheck {
        /// Scale the analytic gradient by 1.1 before comparing (negative
        /// control; the check must fail).
        #[arg(long)]
        corrupt_gradient: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Corpus directory with `train.tsv`, `validation.tsv`, `test.tsv`.
    /// `<split>.feat` caches next to them are used when present.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file `{"model": {...}, "train": {...}}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override of a model or train field, applied after
    /// `--config`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Training seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    fn resolve(&self, runs: Option<usize>) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json(&fs::read_to_string(path).map_err(io_err(path))?)?,
            None => RunConfig::default(),
        };
        cfg = apply_overrides(&cfg, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(runs) = runs {
            cfg.train.runs = runs;
        }
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.render().to_string()))?;
    configure_threads()?;
    dispatch(cli.command)
}

/// Process entry point: prints help, version and errors, maps to an exit
/// code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))
        })?;
    // A second call in the same process (tests) finds the pool built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Extract { manifest, out } => cmd_extract(&manifest, &out),
        Command::Synth {
            n,
            held_out,
            seed,
            out,
        } => cmd_synth(n, held_out, seed, &out),
        Command::Train { run, out } => cmd_train(&run, &out),
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
        } => cmd_eval(&checkpoint, &data, &split, out.as_deref()),
        Command::Protocol {
            run,
            runs,
            reference,
            out,
        } => cmd_protocol(&run, runs, reference.as_deref(), &out),
        Command::InspectGates {
            checkpoint,
            manifest,
            out,
        } => cmd_inspect_gates(&checkpoint, &manifest, &out),
        Command::Selfcheck {
            corrupt_gradient,
            seed,
        } => cmd_selfcheck(corrupt_gradient, seed),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

pub fn cmd_extract(manifest: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest)?;
    let frontend = Frontend::new(FeatureConfig::default());
    let records = featurize(&manifest, &frontend, None)?;
    for r in &records {
        println!("{}\t{}", r.id, r.features.n_frames());
    }
    let records: Vec<_> = records.into_iter().map(|r| (r.id, r.features)).collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    cache::save_cache(out, &records)?;
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

pub fn cmd_synth(n: usize, held_out: Option<usize>, seed: u64, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut cfg = SynthConfig::new(n, seed);
    if let Some(h) = held_out {
        cfg.validation_per_class = h;
        cfg.test_per_class = h;
    }
    let corpus = synth_generate(&cfg, out)?;
    for split in Split::ALL {
        eprintln!("{}: {} items", split.name(), corpus.split(split).len());
    }
    Ok(())
}

fn load_data(dir: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset::load(dir, &FeatureConfig::default())?)
}

pub fn cmd_train(args: &RunArgs, out: &Path) -> Result<(), CliError> {
    let cfg = args.resolve(None)?;
    let data = load_data(&args.data)?;
    let outcome = train(&cfg.train, &cfg.model, &data)?;
    let report = outcome.report(&cfg.train);
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_file(&out.join("report.json"), report.to_json())?;
    write_file(&out.join("metrics.csv"), outcome.result.metrics_csv())?;
    let ckpt = out.join("model.ckpt");
    outcome.best.save(&ckpt)?;
    println!(
        "{}: test accuracy {:.4} (best epoch {})",
        report.tag, outcome.result.test.accuracy, outcome.result.best_epoch
    );
    Ok(())
}

pub fn cmd_protocol(
    args: &RunArgs,
    runs: Option<usize>,
    reference: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = args.resolve(runs)?;
    let reference = reference
        .map(|p| -> Result<TrainReport, CliError> {
            Ok(TrainReport::from_json(
                &fs::read_to_string(p).map_err(io_err(p))?,
            )?)
        })
        .transpose()?;
    let data = load_data(&args.data)?;
    let report = run_protocol(&cfg.train, &cfg.model, &data, reference.as_ref())?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_file(&out.join("report.json"), report.to_json())?;
    let mut csv = String::from("run,epoch,train_loss,val_loss,val_acc\n");
    for r in &report.runs {
        for line in r.metrics_csv().lines().skip(1) {
            csv.push_str(&format!("{},{line}\n", r.run));
        }
    }
    write_file(&out.join("metrics.csv"), csv)?;
    let a = &report.aggregate;
    println!(
        "{}: mean test accuracy {:.4} ± {:.4} over {} runs",
        report.tag, a.mean, a.std, a.n
    );
    if let Some(s) = &report.significance {
        println!(
            "vs {} (mean {:.4}): U = {}, p = {:.6} ({:?})",
            s.reference, s.reference_mean, s.u_statistic, s.p_value, s.method
        );
    }
    Ok(())
}

pub fn cmd_eval(checkpoint: &Path, data: &Path, split: &str, out: Option<&Path>) -> Result<(), CliError> {
    let split = Split::ALL
        .into_iter()
        .find(|s| s.name() == split)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "unknown split `{split}` (expected train, validation or test)"
            ))
        })?;
    let bundle = ModelBundle::load(checkpoint)?;
    let manifest = Manifest::load(&data.join(split.file_name()))?;
    let cache_path = data.join(format!("{}.feat", split.name()));
    let cached = cache_path.is_file().then_some(cache_path);
    let features = featurize(
        &manifest,
        &Frontend::new(FeatureConfig::default()),
        cached.as_deref(),
    )?;
    let examples = Dataset::with_stats(
        bundle.label_map.clone(),
        bundle.normalizer.clone(),
        Vec::new(),
        Vec::new(),
        features,
    )?
    .test;
    let evaluation = evaluate(&bundle.model, &examples, &bundle.label_map)?;
    println!(
        "{} items, accuracy {:.4}",
        evaluation.n_items, evaluation.accuracy
    );
    for (label, acc) in &evaluation.per_class_accuracy {
        println!("  {label}: {acc:.4}");
    }
    if let Some(out) = out {
        write_file(
            out,
            serde_json::to_string_pretty(&evaluation).expect("evaluation serialises"),
        )?;
    }
    Ok(())
}

pub fn cmd_inspect_gates(checkpoint: &Path, manifest: &Path, out: &Path) -> Result<(), CliError> {
    let bundle = ModelBundle::load(checkpoint)?;
    let manifest = Manifest::load(manifest)?;
    let features = featurize(&manifest, &Frontend::new(FeatureConfig::default()), None)?;
    let beta_closed = bundle.model.config().ablation.local_fusion() == LocalFusion::Concat;

    let mut lines = String::new();
    let mut acc = GateAccumulator::default();
    for item in &features {
        let input = bundle.normalizer.apply(&item.features)?;
        let fwd = bundle.model.forward(&input, true)?;
        let predicted = bundle.label_map.name(fwd.predicted());
        let trace = fwd.trace.unwrap_or_default();
        trace
            .check_ranges(beta_closed)
            .map_err(|m| CliError::Model(ModelError::Input(format!("{}: {m}", item.id))))?;
        let record = trace.record(&item.id, &item.label, predicted);
        lines.push_str(&serde_json::to_string(&record).expect("record serialises"));
        lines.push('\n');
        acc.add(&item.label, &trace);
    }
    write_file(out, lines)?;
    let summary_path = labels_path(out);
    let summaries: BTreeMap<_, _> = acc.summaries();
    write_file(
        &summary_path,
        serde_json::to_string_pretty(&summaries).expect("summary serialises"),
    )?;
    eprintln!(
        "wrote {} traces to {} and per-label histograms to {}",
        features.len(),
        out.display(),
        summary_path.display()
    );
    Ok(())
}

/// `<out>.labels.json` next to the JSON-lines export.
pub fn labels_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".labels.json");
    out.with_file_name(name)
}

/// The model and input used by `selfcheck`: 12 frames, prosody embedding
/// 4, hidden 8, 3 filters per kernel, 4 classes.
pub fn selfcheck_fixture(seed: u64) -> Result<(Model, ModelInput, usize), CliError> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::new(ModelConfig::tiny(4), &mut rng)?;
    let t = 12;
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let input = ModelInput::new(
        Tensor::matrix(t, 40, draw(t * 40))?,
        Tensor::matrix(t, 6, draw(t * 6))?,
    )?;
    Ok((model, input, 1))
}

pub fn cmd_selfcheck(corrupt_gradient: bool, seed: u64) -> Result<(), CliError> {
    let (model, input, target) = selfcheck_fixture(seed)?;
    let scale = if corrupt_gradient { 1.1 } else { 1.0 };
    let report = model.gradient_check(&input, target, 1e-5, 1e-4, scale)?;
    let mut stdout = std::io::stdout().lock();
    for p in &report.params {
        let _ = writeln!(
            stdout,
            "{:<28} {:>6} entries  max rel err {:.3e}{}",
            p.name,
            p.entries,
            p.max_rel_error,
            if p.flagged > 0 { "  FAIL" } else { "" }
        );
    }
    if report.passed() {
        let _ = writeln!(
            stdout,
            "selfcheck passed (max rel err {:.3e})",
            report.max_rel_error()
        );
        Ok(())
    } else {
        let names: Vec<_> = report.failing().map(|p| p.name.as_str()).collect();
        Err(CliError::SelfCheckFailed(names.join(", ")))
    }
}
