//! `paraqnn`: generate datasets, train one model, run the benchmark matrix,
//! and render figures.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 training failure.
//! Failures print one line, `paraqnn: error[<category>]: <message>`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use paraqnn_core::bench::{self, BenchConfig, BenchReport};
use paraqnn_core::dataio::{self, Dataset, RegimeConfig, SplitMode};
use paraqnn_core::model::{ModelKind, ModelSpec};
use paraqnn_core::training::{LossWeights, TrainConfig, TrainMode};
use paraqnn_core::{Error, ErrorCategory, Regime};

/// Environment variable naming the default output root.
const OUT_ROOT_ENV: &str = "PARAQNN_OUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "paraqnn", version, about = "Paraconsistent reconstruction of noisy qubit dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a regime preset, corrupt it with noise and write dataset.csv + manifest.json.
    Generate(GenerateArgs),
    /// Train one model on a generated dataset.
    Train(TrainArgs),
    /// Train every (regime, model, seed) cell and write a report.
    Benchmark(BenchmarkArgs),
    /// Emit figure data and SVG charts from a benchmark report.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Regime preset: rabi, lindblad or mixed.
    #[arg(long)]
    regime: String,
    /// Data seed for noise and split assignment.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory [default: $PARAQNN_OUT_ROOT/datasets/<regime>-seed<seed>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hold out the final 15% of the time axis as the test set instead of a random 20%.
    #[arg(long)]
    temporal_holdout: bool,
    /// Clamp noisy observations to [0, 1].
    #[arg(long)]
    clip: bool,
    /// Multiply the preset point count (rabi 10000, lindblad 25000, mixed 50000).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Override the number of samples.
    #[arg(long)]
    n_points: Option<usize>,
    /// Override the Gaussian noise std [preset: 0.08 rabi/lindblad, 0 mixed].
    #[arg(long)]
    gaussian_sigma: Option<f64>,
    /// Override the telegraph amplitude [preset: 0.1 rabi/lindblad, 0 mixed].
    #[arg(long)]
    telegraph_amplitude: Option<f64>,
    /// Override the per-sample telegraph flip probability [preset: 0.02].
    #[arg(long)]
    telegraph_switch_prob: Option<f64>,
    /// Override the 1/f noise std [preset: 0.06 mixed, 0 otherwise].
    #[arg(long)]
    pink_sigma: Option<f64>,
    /// Override the SPAM error probability [preset: 0.02 mixed, 0 otherwise].
    #[arg(long)]
    spam_epsilon: Option<f64>,
    /// JSON file whose keys override the regime configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Model: paraqnn, pinn-incomplete, pinn-known or mlp.
    #[arg(long)]
    model: String,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Model seed (initialization and shuffling).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// benchmark (clean target available) or experimental (noisy data only).
    #[arg(long, default_value = "benchmark")]
    mode: String,
    /// Output directory [default: $PARAQNN_OUT_ROOT/runs/<model>-seed<seed>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the epoch count [preset: rabi 1500, lindblad 2000, mixed 4000].
    #[arg(long, conflicts_with = "scale")]
    epochs: Option<usize>,
    /// Multiply the preset epoch count.
    #[arg(long)]
    scale: Option<f64>,
    /// Override the batch size [preset: 256, mixed 512].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Override the Adam learning rate [preset: 0.001].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// JSON file whose keys override the training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Comma-separated regimes.
    #[arg(long, default_value = "rabi,lindblad,mixed")]
    regimes: String,
    /// Comma-separated models [default: all four].
    #[arg(long, default_value = "paraqnn,pinn-incomplete,pinn-known,mlp")]
    models: String,
    /// Seeds as an inclusive range `a..b` or a comma list.
    #[arg(long, default_value = "42..46")]
    seeds: String,
    /// Multiply preset point and epoch counts, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Data seed shared by every cell.
    #[arg(long, default_value_t = 42)]
    data_seed: u64,
    /// Use the temporal-holdout split.
    #[arg(long)]
    temporal_holdout: bool,
    /// benchmark or experimental.
    #[arg(long, default_value = "benchmark")]
    mode: String,
    /// Worker threads for the cell queue.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory [default: $PARAQNN_OUT_ROOT/benchmark].
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file whose keys override the benchmark configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// report.json written by `benchmark`.
    #[arg(long)]
    report: PathBuf,
    /// Output directory [default: $PARAQNN_OUT_ROOT/figures].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error already classified for the exit status.
struct Failure {
    category: ErrorCategory,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        category: ErrorCategory::Usage,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Usage => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Training => 3,
    }
}

fn output_dir(explicit: &Option<PathBuf>, default_rel: &str) -> CliResult<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => Ok(PathBuf::from(root).join(default_rel)),
        _ => Err(usage(format!("--out not given and {OUT_ROOT_ENV} is not set"))),
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
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

fn apply_config_file<T>(value: T, path: &Option<PathBuf>) -> CliResult<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let Some(path) = path else {
        return Ok(value);
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let patch: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    if !patch.is_object() {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    }
    let mut base = serde_json::to_value(value).expect("configuration serializes");
    merge(&mut base, patch);
    serde_json::from_value(base).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn aggregate(problems: Vec<String>) -> CliResult<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(usage(problems.join("; ")))
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(raw: &str, problems: &mut Vec<String>) -> Vec<T> {
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.parse::<T>() {
            Ok(v) => out.push(v),
            Err(e) => problems.push(e.to_string().trim_start_matches("invalid input: ").to_owned()),
        }
    }
    out
}

fn parse_seeds(raw: &str) -> std::result::Result<Vec<u64>, String> {
    let bad = || format!("bad seeds '{raw}' (expected a..b or a comma list)");
    if let Some((a, b)) = raw.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = raw
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<std::result::Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::from(Error::Io {
            path: dir.to_owned(),
            source: e,
        }))?;
    }
    fs::write(path, contents).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_owned(),
            source: e,
        })
    })
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let mut problems = Vec::new();
    let regime: Option<Regime> = match a.regime.parse() {
        Ok(r) => Some(r),
        Err(e) => {
            problems.push(e.to_string().trim_start_matches("invalid input: ").to_owned());
            None
        }
    };
    if !(a.scale.is_finite() && a.scale > 0.0 && a.scale <= 1.0) {
        problems.push(format!("--scale must be in (0, 1], got {}", a.scale));
    }
    aggregate(problems)?;
    let regime = regime.expect("validated");
    let out = output_dir(&a.out, &format!("datasets/{regime}-seed{}", a.seed))?;

    let mut cfg = RegimeConfig::preset(regime, a.seed).scaled(a.scale);
    if let Some(n) = a.n_points {
        cfg.n_points = n;
    }
    if a.temporal_holdout {
        cfg.split_mode = SplitMode::TemporalHoldout;
    }
    cfg.noise.clip_output |= a.clip;
    let noise = &mut cfg.noise;
    for (slot, v) in [
        (&mut noise.gaussian_sigma, a.gaussian_sigma),
        (&mut noise.telegraph_amplitude, a.telegraph_amplitude),
        (&mut noise.telegraph_switch_prob, a.telegraph_switch_prob),
        (&mut noise.pink_sigma, a.pink_sigma),
        (&mut noise.spam_epsilon, a.spam_epsilon),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    let cfg = apply_config_file(cfg, &a.config)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let ds = dataio::build_dataset(&cfg)?;
    ds.save(&out)?;
    println!(
        "generated {regime}: {} points ({} train, {} val, {} test) -> {}",
        ds.len(),
        ds.indices(dataio::Split::Train).len(),
        ds.indices(dataio::Split::Val).len(),
        ds.indices(dataio::Split::Test).len(),
        out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut problems = Vec::new();
    let kind: Option<ModelKind> = a
        .model
        .parse()
        .map_err(|e: Error| problems.push(e.to_string().trim_start_matches("invalid input: ").to_owned()))
        .ok();
    let mode: Option<TrainMode> = a
        .mode
        .parse()
        .map_err(|e: Error| problems.push(e.to_string().trim_start_matches("invalid input: ").to_owned()))
        .ok();
    if let Some(s) = a.scale {
        if !(s.is_finite() && s > 0.0 && s <= 1.0) {
            problems.push(format!("--scale must be in (0, 1], got {s}"));
        }
    }
    if a.epochs == Some(0) || a.batch_size == Some(0) {
        problems.push("--epochs and --batch-size must be >= 1".into());
    }
    if !a.data.join(dataio::MANIFEST_FILE).is_file() {
        problems.push(format!("--data {}: no {} found", a.data.display(), dataio::MANIFEST_FILE));
    }
    aggregate(problems)?;
    let (kind, mode) = (kind.expect("validated"), mode.expect("validated"));
    let out = output_dir(&a.out, &format!("runs/{kind}-seed{}", a.seed))?;

    let ds = Dataset::load(&a.data)?;
    let regime = ds.config().regime;
    let mut cfg = TrainConfig::preset(regime, a.seed);
    if let Some(s) = a.scale {
        cfg = cfg.scaled(s);
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.learning_rate {
        cfg.adam.learning_rate = lr;
    }
    let cfg = apply_config_file(cfg, &a.config)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let weights = LossWeights::for_regime(regime);
    let (_, run) = bench::train_one(&ds, &ModelSpec::for_kind(kind), &cfg, &weights, mode)?;
    run.checkpoint.save(&out.join(bench::CHECKPOINT_FILE))?;
    write_file(&out.join(bench::TELEMETRY_FILE), &run.telemetry.to_csv())?;
    let tel = &run.telemetry;
    let metrics = serde_json::json!({
        "model": kind,
        "regime": regime,
        "seed": a.seed,
        "mode": mode,
        "train": cfg,
        "test_mse_clean": tel.test_mse_clean,
        "test_mse_noisy": tel.test_mse_noisy,
        "phase_mse": run.phase_mse,
        "contradiction_rate": tel.contradiction_rate,
        "final_alpha": tel.epochs.last().and_then(|r| r.alpha),
        "physics": tel.physics,
        "stamp": run.checkpoint.stamp,
    });
    write_file(
        &out.join("metrics.json"),
        &(serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n"),
    )?;
    write_file(
        &out.join(bench::TIMINGS_FILE),
        &format!("wall_clock_s\n{}\n", tel.wall_clock_s),
    )?;
    println!(
        "trained {kind} on {regime} (seed {}, {} epochs): test MSE {:.3e} vs clean, {:.3e} vs noisy -> {}",
        a.seed,
        cfg.epochs,
        tel.test_mse_clean,
        tel.test_mse_noisy,
        out.display()
    );
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> CliResult<()> {
    let mut problems = Vec::new();
    let regimes: Vec<Regime> = parse_list(&a.regimes, &mut problems);
    let models: Vec<ModelKind> = parse_list(&a.models, &mut problems);
    let seeds = parse_seeds(&a.seeds).unwrap_or_else(|e| {
        problems.push(e);
        Vec::new()
    });
    let mode: Option<TrainMode> = a
        .mode
        .parse()
        .map_err(|e: Error| problems.push(e.to_string().trim_start_matches("invalid input: ").to_owned()))
        .ok();
    if a.workers == 0 {
        problems.push("--workers must be >= 1".into());
    }
    let mut cfg = BenchConfig::new(regimes, models, seeds);
    cfg.scale = a.scale;
    cfg.data_seed = a.data_seed;
    if a.temporal_holdout {
        cfg.split_mode = SplitMode::TemporalHoldout;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if problems.is_empty() {
        cfg = apply_config_file(cfg, &a.config)?;
        if let Err(e) = cfg.validate() {
            problems.push(e.to_string().trim_start_matches("invalid configuration: ").to_owned());
        }
    }
    aggregate(problems)?;
    let out = output_dir(&a.out, "benchmark")?;

    let result = bench::run_matrix(&cfg, a.workers)?;
    bench::write_matrix(&result, &out)?;
    let report = &result.report;
    for s in &report.summaries {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:<16} n={} mse_clean {} ± {}",
            s.regime,
            s.model,
            s.n_seeds,
            fmt(s.mean_mse_clean),
            fmt(s.std_mse_clean)
        );
    }
    for e in report.entries.iter().filter(|e| e.error.is_some()) {
        eprintln!(
            "cell {}/{}/seed{} failed: {}",
            e.regime,
            e.model,
            e.seed,
            e.error.as_deref().unwrap_or_default()
        );
    }
    println!("report -> {}", out.join(bench::REPORT_FILE).display());
    if report.entries.iter().all(|e| e.error.is_some()) {
        return Err(Failure {
            category: ErrorCategory::Training,
            message: "every benchmark cell failed".into(),
        });
    }
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let out = output_dir(&a.out, "figures")?;
    let report = BenchReport::load(&a.report)?;
    let root = a.report.parent().map(Path::to_path_buf).unwrap_or_default();
    let inputs = bench::load_figure_inputs(&report, &root);
    let summary = bench::emit_figures(&report, &inputs, &out)?;
    for g in &summary.gaps {
        eprintln!("gap: {g}");
    }
    println!("wrote {} files -> {}", summary.written.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Plot(a) => plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "paraqnn: error[{}]: {}",
                ErrorCategory::Usage.as_str(),
                first.trim_start_matches("error: ")
            );
            return ExitCode::from(exit_code(ErrorCategory::Usage));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "paraqnn: error[{}]: {}",
                f.category.as_str(),
                f.message.replace('\n', " ")
            );
            ExitCode::from(exit_code(f.category))
        }
    }
}
