use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use noisesense_core::classifier::{evaluate, train, write_history, Evaluation, ModelCheckpoint};
use noisesense_core::config::{Profile, RunConfig};
use noisesense_core::dataset::{
    dataset_checksum, generate_dataset, load_dataset, save_dataset, split_dataset, GenerateOptions,
};
use noisesense_core::dynamics::{population, write_trajectory, Recording};
use noisesense_core::efficiency::{efficiency_map, write_map, Protocol};
use noisesense_core::model::DriveTag;
use noisesense_core::noise::NoiseClass;

#[derive(Parser, Debug)]
#[command(
    name = "noisesense",
    version,
    about = "Two-qubit STIRAP noise sensor: simulate, map, generate, train, evaluate"
)]
struct Cli {
    /// TOML file overriding the selected profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,

    /// Overrides the dataset, split and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Full,
    Fast,
    Smoke,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Full => Profile::Full,
            ProfileArg::Fast => Profile::Fast,
            ProfileArg::Smoke => Profile::Smoke,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate one realization and write population histories.
    Simulate(SimulateArgs),
    /// Efficiency over a (delta1, delta2) grid, one file per drive condition.
    Map(MapArgs),
    /// Generate (or resume) the labelled dataset.
    Generate(GenerateArgs),
    /// Train the classifier on the dataset's training split.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of a trained model.
    Evaluate(EvaluateArgs),
    /// Classify one raw feature vector.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta2: f64,
    #[arg(long, default_value = "equal")]
    drive: DriveTag,
    /// Integration steps between recorded rows.
    #[arg(long, default_value_t = 200)]
    stride: usize,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Drive conditions (default: all three).
    #[arg(long = "drive")]
    drives: Vec<DriveTag>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    max: Option<f64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Dataset file (default: <out>/dataset.txt).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Checkpoint file (default: <out>/model.json).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// xi_equal xi_pump_double xi_stokes_double
    #[arg(num_args = 3, required = true)]
    features: Vec<f64>,
}

/// Usage and configuration problems exit with 2, everything else with 1.
struct UsageError(String);

impl std::fmt::Debug for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let profile: Profile = cli.profile.map(Into::into).unwrap_or(Profile::Full);
    let mut cfg = RunConfig::profile(profile);
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
        let overlay: toml::Value = toml::from_str(&text)
            .map_err(|e| usage(format!("invalid config file {}: {e}", path.display())))?;
        let mut base = toml::Value::try_from(&cfg)?;
        merge(&mut base, overlay);
        cfg = base
            .try_into()
            .map_err(|e| usage(format!("invalid config file {}: {e}", path.display())))?;
    }
    if let Some(seed) = cli.seed {
        cfg.dataset.master_seed = seed;
        cfg.dataset.split_seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn core_err(e: noisesense_core::Error) -> anyhow::Error {
    match e {
        noisesense_core::Error::Config(m) => usage(format!("configuration error: {m}")),
        other => other.into(),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, &a),
        Command::Map(a) => map(&cfg, &a),
        Command::Generate(a) => generate(&cfg, &a),
        Command::Train(a) => train_cmd(&cfg, &a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, &a),
        Command::Predict(a) => predict(&cfg, &a),
    }
}

fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> anyhow::Result<()> {
    if a.stride == 0 {
        return Err(usage("--stride must be at least 1"));
    }
    let protocol = Protocol::new(&cfg.sim_config(), a.drive).map_err(core_err)?;
    let rec = Recording::new(a.stride, *protocol.readout());
    let run = protocol
        .run(a.delta1, a.delta2, Some(&rec))
        .map_err(core_err)?;
    let path = cfg.out_dir.join(format!("trajectory-{}.tsv", a.drive));
    write_trajectory(BufWriter::new(fs::File::create(&path)?), &run.trajectory)?;
    let xi = population(&run.state, protocol.readout());
    let max_p = |k: usize| {
        run.trajectory
            .iter()
            .map(|r| r.populations[k])
            .fold(0.0, f64::max)
    };
    println!("drive {} delta1 {} delta2 {}", a.drive, a.delta1, a.delta2);
    println!("xi = {xi:.9}");
    println!(
        "max P2 = {:.6}  max P3 = {:.6e}  norm drift = {:.2e}",
        max_p(2),
        max_p(3),
        run.norm_drift
    );
    println!("trajectory written to {}", path.display());
    Ok(())
}

fn map(cfg: &RunConfig, a: &MapArgs) -> anyhow::Result<()> {
    let mut grid = cfg.map;
    grid.points = a.points.unwrap_or(grid.points);
    grid.min = a.min.unwrap_or(grid.min);
    grid.max = a.max.unwrap_or(grid.max);
    let drives = if a.drives.is_empty() {
        DriveTag::ALL.to_vec()
    } else {
        a.drives.clone()
    };
    let sim = cfg.sim_config();
    for tag in drives {
        let protocol = Protocol::new(&sim, tag).map_err(core_err)?;
        let m = efficiency_map(&protocol, &grid).map_err(core_err)?;
        let path = cfg.out_dir.join(format!("map-{tag}.tsv"));
        write_map(
            BufWriter::new(fs::File::create(&path)?),
            std::slice::from_ref(&m),
        )?;
        println!(
            "{tag}: {} points, xi(0,0) ~ {:.6}, max {:.6} -> {}",
            grid.points * grid.points,
            m.nearest(0.0, 0.0),
            m.max(),
            path.display()
        );
    }
    Ok(())
}

fn dataset_path(cfg: &RunConfig, explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("dataset.txt"))
}

fn model_path(cfg: &RunConfig, explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("model.json"))
}

fn generate(cfg: &RunConfig, a: &GenerateArgs) -> anyhow::Result<()> {
    let n = a.samples_per_class.unwrap_or(cfg.dataset.samples_per_class);
    let cache_dir = a.cache_dir.clone().unwrap_or_else(|| cfg.cache_dir());
    let report = generate_dataset(
        n,
        cfg.dataset.master_seed,
        &cfg.sim_config(),
        &GenerateOptions {
            cache_dir: Some(cache_dir),
        },
    )
    .map_err(core_err)?;
    let path = dataset_path(cfg, &a.output);
    save_dataset(&path, &report.samples)?;
    println!(
        "{} samples written to {} ({} from cache), checksum {:016x}",
        report.samples.len(),
        path.display(),
        report.cache_hits,
        dataset_checksum(&report.samples)
    );
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!(
                "failed: class {} index {} seed {}: {}",
                f.class, f.index, f.seed, f.message
            );
        }
        bail!("{} samples failed", report.failures.len());
    }
    Ok(())
}

fn load_samples(path: &Path) -> anyhow::Result<Vec<noisesense_core::dataset::Sample>> {
    if !path.exists() {
        bail!(
            "dataset file {} does not exist (run `noisesense generate` first)",
            path.display()
        );
    }
    Ok(load_dataset(path)?)
}

fn load_model(path: &Path) -> anyhow::Result<ModelCheckpoint> {
    if !path.exists() {
        bail!(
            "model checkpoint {} does not exist (run `noisesense train` first)",
            path.display()
        );
    }
    Ok(ModelCheckpoint::load(path)?)
}

fn train_cmd(cfg: &RunConfig, a: &TrainArgs) -> anyhow::Result<()> {
    let samples = load_samples(&dataset_path(cfg, &a.dataset))?;
    let split = split_dataset(&samples, cfg.dataset.split_seed)?;
    let mut tc = cfg.train;
    tc.epochs = a.epochs.unwrap_or(tc.epochs);
    if tc.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    let ckpt = train(&split, &tc, &cfg.architecture()).map_err(core_err)?;
    let path = model_path(cfg, &a.model);
    ckpt.save(&path)?;
    let hist_path = cfg.out_dir.join("history.tsv");
    write_history(BufWriter::new(fs::File::create(&hist_path)?), &ckpt.history)?;
    let last = ckpt.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} samples: train loss {:.4} acc {:.4}, validation loss {:.4} acc {:.4}",
        tc.epochs,
        split.train.len(),
        last.train_loss,
        last.train_accuracy,
        last.val_loss,
        last.val_accuracy
    );
    let test = evaluate(&ckpt, &split.test)?;
    println!(
        "test accuracy {:.4} on {} samples",
        test.accuracy,
        split.test.len()
    );
    println!(
        "model written to {}, history to {}",
        path.display(),
        hist_path.display()
    );
    Ok(())
}

fn print_evaluation(e: &Evaluation) {
    println!("accuracy: {:.2}%", 100.0 * e.accuracy);
    println!("confusion matrix (rows: true class, columns: predicted; row percentages)");
    print!("{:>20}", "");
    for k in 0..NoiseClass::COUNT {
        print!("{k:>8}");
    }
    println!();
    for (i, row) in e.percentages.iter().enumerate() {
        print!("{:>20}", format!("{i} {}", NoiseClass::ALL[i]));
        for v in row {
            print!("{v:>8.1}");
        }
        println!("   (n={})", e.counts[i].iter().sum::<usize>());
    }
    println!(
        "Markovian vs non-Markovian accuracy: {:.2}%",
        100.0 * e.markovian_accuracy
    );
    println!(
        "non-Markovian within-group accuracy: {:.2}%",
        100.0 * e.non_markovian_within
    );
    println!(
        "Markovian within-group accuracy: {:.2}%",
        100.0 * e.markovian_within
    );
}

fn evaluate_cmd(cfg: &RunConfig, a: &EvaluateArgs) -> anyhow::Result<()> {
    let ckpt = load_model(&model_path(cfg, &a.model))?;
    let samples = load_samples(&dataset_path(cfg, &a.dataset))?;
    let chosen = match a.split {
        SplitArg::All => samples,
        s => {
            let split = split_dataset(&samples, cfg.dataset.split_seed)?;
            match s {
                SplitArg::Train => split.train,
                SplitArg::Validation => split.validation,
                _ => split.test,
            }
        }
    };
    let e = evaluate(&ckpt, &chosen)?;
    print_evaluation(&e);
    let path = cfg.out_dir.join("evaluation.json");
    fs::write(&path, serde_json::to_string_pretty(&e)?)?;
    Ok(())
}

fn predict(cfg: &RunConfig, a: &PredictArgs) -> anyhow::Result<()> {
    let ckpt = load_model(&model_path(cfg, &a.model))?;
    let (label, probs) = ckpt.predict(&a.features)?;
    println!("label {label} ({})", NoiseClass::ALL[label]);
    for (k, p) in probs.iter().enumerate() {
        println!("  {k} {:<18} {p:.6}", NoiseClass::ALL[k]);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
