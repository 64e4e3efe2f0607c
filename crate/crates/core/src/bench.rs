//! Evaluation matrix over regimes × models × seeds, the versioned report, and
//! figure emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::dataio::{self, Dataset, RegimeConfig, Split, SplitMode};
use crate::dyngen::Regime;
use crate::error::{Error, Result};
use crate::model::{Checkpoint, Model, ModelKind, ModelSpec};
use crate::provenance::{self, Stamp};
use crate::svg::{Chart, Series, Style};
use crate::training::{self, EpochRecord, LossWeights, Telemetry, TrainConfig, TrainMode};

pub const REPORT_FORMAT: &str = "paraqnn-bench-report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Published comparison models that this crate does not implement.
pub const NOT_REPRODUCED: [&str; 3] = ["random-forest", "xgboost", "gan"];

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::InvalidInput("mse of an empty batch".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "mse: {} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub regimes: Vec<Regime>,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    /// Multiplies both the point count and the epoch count of every preset.
    pub scale: f64,
    pub data_seed: u64,
    pub split_mode: SplitMode,
    pub mode: TrainMode,
}

impl BenchConfig {
    pub fn new(regimes: Vec<Regime>, models: Vec<ModelKind>, seeds: Vec<u64>) -> Self {
        BenchConfig {
            regimes,
            models,
            seeds,
            scale: 1.0,
            data_seed: 42,
            split_mode: SplitMode::Random,
            mode: TrainMode::Benchmark,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.regimes.is_empty() {
            problems.push("no regimes selected".to_owned());
        }
        if self.models.is_empty() {
            problems.push("no models selected".to_owned());
        }
        if self.seeds.is_empty() {
            problems.push("no seeds selected".to_owned());
        }
        if !(self.scale.is_finite() && self.scale > 0.0 && self.scale <= 1.0) {
            problems.push(format!("scale must be in (0, 1], got {}", self.scale));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    pub fn regime_config(&self, regime: Regime) -> RegimeConfig {
        let mut cfg = RegimeConfig::preset(regime, self.data_seed).scaled(self.scale);
        cfg.split_mode = self.split_mode;
        cfg
    }

    pub fn train_config(&self, regime: Regime, seed: u64) -> TrainConfig {
        TrainConfig::preset(regime, seed).scaled(self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub regime: Regime,
    pub model: ModelKind,
    pub seed: u64,
    pub status: CellStatus,
    pub test_mse_clean: Option<f64>,
    pub test_mse_noisy: Option<f64>,
    /// Test MSE against the clean trace within each drive segment.
    pub phase_mse: Vec<Option<f64>>,
    pub contradiction_rate: Option<f64>,
    pub final_alpha: Option<f64>,
    pub physics: Vec<(String, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub regime: Regime,
    pub model: ModelKind,
    pub n_seeds: usize,
    pub mean_mse_clean: Option<f64>,
    /// Sample standard deviation; 0 for a single seed.
    pub std_mse_clean: Option<f64>,
    pub mean_mse_noisy: Option<f64>,
    pub std_mse_noisy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: ModelKind,
    pub paraqnn_below: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingFlags {
    pub regime: Regime,
    pub comparisons: Vec<Comparison>,
    pub paraqnn_lowest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub regime: Regime,
    pub n_points: usize,
    pub config_hash: String,
    pub table_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotReproduced {
    pub model: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format: String,
    pub schema_version: u32,
    pub config: BenchConfig,
    pub model_specs: Vec<ModelSpec>,
    pub datasets: Vec<DatasetRecord>,
    pub entries: Vec<BenchEntry>,
    pub summaries: Vec<CellSummary>,
    pub orderings: Vec<OrderingFlags>,
    pub not_reproduced: Vec<NotReproduced>,
    pub stamp: Stamp,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Per-(regime, model) aggregates in configuration order.
pub fn summarize(entries: &[BenchEntry], regimes: &[Regime], models: &[ModelKind]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for &regime in regimes {
        for &model in models {
            let ok: Vec<&BenchEntry> = entries
                .iter()
                .filter(|e| e.regime == regime && e.model == model && e.status == CellStatus::Ok)
                .collect();
            let clean: Vec<f64> = ok.iter().filter_map(|e| e.test_mse_clean).collect();
            let noisy: Vec<f64> = ok.iter().filter_map(|e| e.test_mse_noisy).collect();
            let (mean_mse_clean, std_mse_clean) = mean_std(&clean);
            let (mean_mse_noisy, std_mse_noisy) = mean_std(&noisy);
            out.push(CellSummary {
                regime,
                model,
                n_seeds: ok.len(),
                mean_mse_clean,
                std_mse_clean,
                mean_mse_noisy,
                std_mse_noisy,
            });
        }
    }
    out
}

/// ParaQNN-versus-baseline flags from the per-cell means.
pub fn orderings(summaries: &[CellSummary]) -> Vec<OrderingFlags> {
    let mut regimes: Vec<Regime> = summaries.iter().map(|s| s.regime).collect();
    regimes.dedup();
    let mut out = Vec::new();
    for regime in regimes {
        let cells: Vec<&CellSummary> = summaries.iter().filter(|s| s.regime == regime).collect();
        let Some(para) = cells
            .iter()
            .find(|s| s.model == ModelKind::ParaQnn)
            .and_then(|s| s.mean_mse_clean)
        else {
            continue;
        };
        let comparisons: Vec<Comparison> = cells
            .iter()
            .filter(|s| s.model != ModelKind::ParaQnn)
            .map(|s| Comparison {
                model: s.model,
                paraqnn_below: s.mean_mse_clean.is_some_and(|m| para < m),
            })
            .collect();
        out.push(OrderingFlags {
            regime,
            paraqnn_lowest: comparisons.iter().all(|c| c.paraqnn_below),
            comparisons,
        });
    }
    out
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300),
        (None, None) => true,
        _ => false,
    }
}

impl BenchReport {
    pub fn summary(&self, regime: Regime, model: ModelKind) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.regime == regime && s.model == model)
    }

    pub fn ordering(&self, regime: Regime) -> Option<&OrderingFlags> {
        self.orderings.iter().find(|o| o.regime == regime)
    }

    /// Checks that aggregates and flags follow from the per-seed entries.
    pub fn verify(&self) -> Result<()> {
        self.stamp.check()?;
        let fresh = summarize(&self.entries, &self.config.regimes, &self.config.models);
        if fresh.len() != self.summaries.len() {
            return Err(Error::InvalidInput("report summaries do not match its entries".into()));
        }
        for (a, b) in fresh.iter().zip(&self.summaries) {
            let same = a.regime == b.regime
                && a.model == b.model
                && a.n_seeds == b.n_seeds
                && close(a.mean_mse_clean, b.mean_mse_clean)
                && close(a.std_mse_clean, b.std_mse_clean)
                && close(a.mean_mse_noisy, b.mean_mse_noisy)
                && close(a.std_mse_noisy, b.std_mse_noisy);
            if !same {
                return Err(Error::InvalidInput(format!(
                    "summary for {}/{} does not match its entries",
                    b.regime, b.model
                )));
            }
        }
        if orderings(&self.summaries) != self.orderings {
            return Err(Error::InvalidInput("ordering flags do not match summaries".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<BenchReport> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let head: serde_json::Value = serde_json::from_str(&raw).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        let format = head.get("format").and_then(|v| v.as_str());
        let version = head.get("schema_version").and_then(|v| v.as_u64());
        if format != Some(REPORT_FORMAT) || version != Some(REPORT_SCHEMA_VERSION as u64) {
            return Err(Error::Schema {
                path: path.to_owned(),
                reason: format!(
                    "expected {REPORT_FORMAT} v{REPORT_SCHEMA_VERSION}, found {format:?} v{version:?}"
                ),
            });
        }
        let report: BenchReport = serde_json::from_value(head).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        report
            .verify()
            .map_err(|e| Error::malformed(path, e.to_string()))?;
        Ok(report)
    }
}

/// Everything a single trained cell produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub regime: Regime,
    pub model: ModelKind,
    pub seed: u64,
    pub result: Result<TrainedRun, String>,
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub telemetry: Telemetry,
    /// Model output at every dataset time.
    pub reconstruction: Vec<f64>,
    pub phase_mse: Vec<Option<f64>>,
    pub checkpoint: Checkpoint,
}

#[derive(Serialize)]
struct RunIdentity<'a> {
    dataset_sha256: &'a str,
    spec: &'a ModelSpec,
    train: &'a TrainConfig,
    weights: &'a LossWeights,
    mode: TrainMode,
}

/// Test MSE within each drive segment of the dataset's schedule.
pub fn phase_mse(ds: &Dataset, reconstruction: &[f64]) -> Vec<Option<f64>> {
    let segments = ds.config().schedule.segments();
    let test = ds.indices(Split::Test);
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let last = k + 1 == segments.len();
            let idx: Vec<usize> = test
                .iter()
                .copied()
                .filter(|&i| {
                    let t = ds.times[i];
                    t >= seg.start && (t < seg.end || (last && t <= seg.end))
                })
                .collect();
            let p: Vec<f64> = idx.iter().map(|&i| reconstruction[i]).collect();
            let c: Vec<f64> = idx.iter().map(|&i| ds.y_clean[i]).collect();
            mse(&p, &c).ok()
        })
        .collect()
}

/// Builds, trains and evaluates one model on one dataset.
pub fn train_one(
    ds: &Dataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    weights: &LossWeights,
    mode: TrainMode,
) -> Result<(Model, TrainedRun)> {
    let mut model = Model::build(spec, cfg.model_seed)?;
    let telemetry = training::train(&mut model, ds, weights, cfg, mode)?;
    let tau = dataio::normalize_time(ds);
    let reconstruction = training::predict_all(&model, &tau);
    let phase = phase_mse(ds, &reconstruction);
    let identity = RunIdentity {
        dataset_sha256: &ds.manifest.table_sha256,
        spec,
        train: cfg,
        weights,
        mode,
    };
    let stamp = provenance::version_stamp(&identity, &[ds.config().data_seed, cfg.model_seed]);
    let checkpoint = Checkpoint::new(&model, cfg.model_seed, stamp);
    Ok((
        model,
        TrainedRun {
            telemetry,
            reconstruction,
            phase_mse: phase,
            checkpoint,
        },
    ))
}

pub struct MatrixOutput {
    pub report: BenchReport,
    pub datasets: Vec<Dataset>,
    pub runs: Vec<RunOutput>,
}

fn entry_from(run: &RunOutput) -> BenchEntry {
    match &run.result {
        Ok(r) => BenchEntry {
            regime: run.regime,
            model: run.model,
            seed: run.seed,
            status: CellStatus::Ok,
            test_mse_clean: Some(r.telemetry.test_mse_clean),
            test_mse_noisy: Some(r.telemetry.test_mse_noisy),
            phase_mse: r.phase_mse.clone(),
            contradiction_rate: r.telemetry.contradiction_rate,
            final_alpha: r.telemetry.epochs.last().and_then(|e| e.alpha),
            physics: r.telemetry.physics.clone(),
            error: None,
        },
        Err(msg) => BenchEntry {
            regime: run.regime,
            model: run.model,
            seed: run.seed,
            status: CellStatus::Failed,
            test_mse_clean: None,
            test_mse_noisy: None,
            phase_mse: Vec::new(),
            contradiction_rate: None,
            final_alpha: None,
            physics: Vec::new(),
            error: Some(msg.clone()),
        },
    }
}

/// Trains every (regime, model, seed) cell on a pool of `workers` threads.
///
/// Datasets are generated from the presets once per regime. A failing cell
/// is recorded as failed and the rest of the matrix still runs. Results are
/// assembled in configuration order, so the report does not depend on the
/// worker count.
pub fn run_matrix(cfg: &BenchConfig, workers: usize) -> Result<MatrixOutput> {
    cfg.validate()?;
    let datasets = cfg
        .regimes
        .iter()
        .map(|&r| dataio::build_dataset(&cfg.regime_config(r)))
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for (ri, &regime) in cfg.regimes.iter().enumerate() {
        for &model in &cfg.models {
            for &seed in &cfg.seeds {
                jobs.push((ri, regime, model, seed));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RunOutput>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..workers.max(1).min(jobs.len()) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(ri, regime, model, seed)) = jobs.get(j) else {
                    break;
                };
                let ds = &datasets[ri];
                let result = train_one(
                    ds,
                    &ModelSpec::for_kind(model),
                    &cfg.train_config(regime, seed),
                    &LossWeights::for_regime(regime),
                    cfg.mode,
                )
                .map(|(_, run)| run)
                .map_err(|e| e.to_string());
                *slots[j].lock().expect("slot lock") = Some(RunOutput {
                    regime,
                    model,
                    seed,
                    result,
                });
            });
        }
    });
    let runs: Vec<RunOutput> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect();

    let entries: Vec<BenchEntry> = runs.iter().map(entry_from).collect();
    let summaries = summarize(&entries, &cfg.regimes, &cfg.models);
    let report = BenchReport {
        format: REPORT_FORMAT.to_owned(),
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        model_specs: cfg.models.iter().map(|&m| ModelSpec::for_kind(m)).collect(),
        datasets: datasets
            .iter()
            .map(|d| DatasetRecord {
                regime: d.config().regime,
                n_points: d.len(),
                config_hash: d.manifest.stamp.config_hash.clone(),
                table_sha256: d.manifest.table_sha256.clone(),
            })
            .collect(),
        orderings: orderings(&summaries),
        summaries,
        entries,
        not_reproduced: NOT_REPRODUCED
            .iter()
            .map(|m| NotReproduced {
                model: (*m).to_owned(),
                status: "not reproduced".to_owned(),
            })
            .collect(),
        stamp: provenance::version_stamp(cfg, &cfg.seeds),
    };
    Ok(MatrixOutput {
        report,
        datasets,
        runs,
    })
}

pub fn run_dir(root: &Path, regime: Regime, model: ModelKind, seed: u64) -> PathBuf {
    root.join("runs")
        .join(regime.as_str())
        .join(model.as_str())
        .join(format!("seed{seed}"))
}

pub fn dataset_dir(root: &Path, regime: Regime) -> PathBuf {
    root.join("datasets").join(regime.as_str())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn reconstruction_csv(times: &[f64], pred: &[f64]) -> String {
    let mut s = String::from("time_us,prediction\n");
    for (t, p) in times.iter().zip(pred) {
        s.push_str(&format!("{t},{p}\n"));
    }
    s
}

/// Writes the report, per-run artifacts and datasets under `root`. Wall-clock
/// timings go to a separate file so everything else is reproducible.
pub fn write_matrix(out: &MatrixOutput, root: &Path) -> Result<()> {
    for ds in &out.datasets {
        ds.save(&dataset_dir(root, ds.config().regime))?;
    }
    let mut timings = String::from("regime,model,seed,wall_clock_s\n");
    for run in &out.runs {
        let dir = run_dir(root, run.regime, run.model, run.seed);
        if let Ok(r) = &run.result {
            let ds = out
                .datasets
                .iter()
                .find(|d| d.config().regime == run.regime)
                .expect("dataset for every regime");
            write(&dir.join(TELEMETRY_FILE), &r.telemetry.to_csv())?;
            write(
                &dir.join(RECONSTRUCTION_FILE),
                &reconstruction_csv(&ds.times, &r.reconstruction),
            )?;
            r.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            timings.push_str(&format!(
                "{},{},{},{}\n",
                run.regime, run.model, run.seed, r.telemetry.wall_clock_s
            ));
        }
    }
    write(&root.join(TIMINGS_FILE), &timings)?;
    out.report.save(&root.join(REPORT_FILE))
}

/// Per-run series available for plotting; `None` marks a gap.
#[derive(Debug, Clone, Default)]
pub struct RunSeries {
    pub telemetry: Option<Vec<EpochRecord>>,
    pub reconstruction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct FigureInputs {
    pub datasets: BTreeMap<Regime, Dataset>,
    pub runs: BTreeMap<(Regime, ModelKind, u64), RunSeries>,
}

fn parse_reconstruction(text: &str) -> Option<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next()? != "time_us,prediction" {
        return None;
    }
    lines
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
        .collect()
}

/// Collects whatever run artifacts exist next to a report.
pub fn load_figure_inputs(report: &BenchReport, root: &Path) -> FigureInputs {
    let mut inputs = FigureInputs::default();
    for &regime in &report.config.regimes {
        if let Ok(ds) = Dataset::load(&dataset_dir(root, regime)) {
            inputs.datasets.insert(regime, ds);
        }
    }
    for e in &report.entries {
        let dir = run_dir(root, e.regime, e.model, e.seed);
        let telemetry = fs::read_to_string(dir.join(TELEMETRY_FILE))
            .ok()
            .and_then(|t| training::parse_telemetry_csv(&t).ok());
        let reconstruction = fs::read_to_string(dir.join(RECONSTRUCTION_FILE))
            .ok()
            .and_then(|t| parse_reconstruction(&t));
        inputs.runs.insert(
            (e.regime, e.model, e.seed),
            RunSeries {
                telemetry,
                reconstruction,
            },
        );
    }
    inputs
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FigureSummary {
    pub written: Vec<PathBuf>,
    pub gaps: Vec<String>,
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Emits, per regime, four panels as CSV data plus an SVG chart each:
/// noisy data with the clean trace, ParaQNN loss curves, the α trajectory,
/// and model reconstructions. Plotted runs use the lowest successful seed.
/// Missing inputs are skipped and listed in `gaps.txt`.
pub fn emit_figures(report: &BenchReport, inputs: &FigureInputs, out_dir: &Path) -> Result<FigureSummary> {
    if !report.entries.iter().any(|e| e.status == CellStatus::Ok) {
        return Err(Error::Missing("report has no successful runs to plot".into()));
    }
    let mut summary = FigureSummary::default();
    let mut emit = |name: String, data: String, chart: Chart| -> Result<()> {
        let csv = out_dir.join(format!("{name}.csv"));
        let svg = out_dir.join(format!("{name}.svg"));
        write(&csv, &data)?;
        write(&svg, &chart.render())?;
        summary.written.push(csv);
        summary.written.push(svg);
        Ok(())
    };
    let mut gaps = Vec::new();

    let rows = report.summaries.iter().map(|s| {
        vec![
            s.regime.to_string(),
            s.model.to_string(),
            s.n_seeds.to_string(),
            opt_str(s.mean_mse_clean),
            opt_str(s.std_mse_clean),
            opt_str(s.mean_mse_noisy),
            opt_str(s.std_mse_noisy),
        ]
    });
    let summary_csv = table(
        &[
            "regime",
            "model",
            "n_seeds",
            "mean_mse_clean",
            "std_mse_clean",
            "mean_mse_noisy",
            "std_mse_noisy",
        ],
        rows,
    );

    for &regime in &report.config.regimes {
        let rep_seed = |model: ModelKind| -> Option<u64> {
            report
                .entries
                .iter()
                .filter(|e| e.regime == regime && e.model == model && e.status == CellStatus::Ok)
                .map(|e| e.seed)
                .min()
        };
        let series = |model: ModelKind| rep_seed(model).and_then(|s| inputs.runs.get(&(regime, model, s)));
        let ds = inputs.datasets.get(&regime);

        // (a) observations
        match ds {
            Some(ds) => {
                let stride = (ds.len() / 2000).max(1);
                let sub: Vec<usize> = (0..ds.len()).step_by(stride).collect();
                let data = table(
                    &["time_us", "y_noisy", "y_clean"],
                    (0..ds.len()).map(|i| {
                        vec![ds.times[i].to_string(), ds.y_noisy[i].to_string(), ds.y_clean[i].to_string()]
                    }),
                );
                let chart = Chart {
                    title: format!("{regime}: noisy observations"),
                    x_label: "time (us)".into(),
                    y_label: "P(|1>)".into(),
                    log_y: false,
                    series: vec![
                        Series {
                            name: "noisy".into(),
                            x: sub.iter().map(|&i| ds.times[i]).collect(),
                            y: sub.iter().map(|&i| ds.y_noisy[i]).collect(),
                            style: Style::Points,
                        },
                        Series {
                            name: "clean".into(),
                            x: ds.times.clone(),
                            y: ds.y_clean.clone(),
                            style: Style::Line,
                        },
                    ],
                };
                emit(format!("{regime}_a_data"), data, chart)?;
            }
            None => gaps.push(format!("{regime}: dataset missing, panels a and d skipped")),
        }

        // (b) loss curves and (c) alpha, from ParaQNN telemetry
        match series(ModelKind::ParaQnn).and_then(|s| s.telemetry.as_ref()) {
            Some(tel) => {
                let epochs: Vec<f64> = tel.iter().map(|r| r.epoch as f64).collect();
                let data = table(
                    &["epoch", "train_loss", "val_loss"],
                    tel.iter().map(|r| {
                        vec![r.epoch.to_string(), r.train_loss.to_string(), opt_str(r.val_loss)]
                    }),
                );
                let chart = Chart {
                    title: format!("{regime}: paraconsistent loss"),
                    x_label: "epoch".into(),
                    y_label: "loss".into(),
                    log_y: true,
                    series: vec![
                        Series {
                            name: "train".into(),
                            x: epochs.clone(),
                            y: tel.iter().map(|r| r.train_loss).collect(),
                            style: Style::Line,
                        },
                        Series {
                            name: "validation".into(),
                            x: epochs.clone(),
                            y: tel.iter().map(|r| r.val_loss.unwrap_or(f64::NAN)).collect(),
                            style: Style::Line,
                        },
                    ],
                };
                emit(format!("{regime}_b_loss"), data, chart)?;
                let data = table(
                    &["epoch", "alpha"],
                    tel.iter().map(|r| vec![r.epoch.to_string(), opt_str(r.alpha)]),
                );
                let chart = Chart {
                    title: format!("{regime}: contradiction coefficient"),
                    x_label: "epoch".into(),
                    y_label: "alpha".into(),
                    log_y: false,
                    series: vec![Series {
                        name: "alpha".into(),
                        x: epochs,
                        y: tel.iter().map(|r| r.alpha.unwrap_or(f64::NAN)).collect(),
                        style: Style::Line,
                    }],
                };
                emit(format!("{regime}_c_alpha"), data, chart)?;
            }
            None => gaps.push(format!("{regime}: ParaQNN telemetry missing, panels b and c skipped")),
        }

        // (d) reconstructions
        if let Some(ds) = ds {
            let mut cols: Vec<(ModelKind, &Vec<f64>)> = Vec::new();
            for &model in &report.config.models {
                match series(model).and_then(|s| s.reconstruction.as_ref()) {
                    Some(r) if r.len() == ds.len() => cols.push((model, r)),
                    _ => gaps.push(format!("{regime}: {model} reconstruction missing")),
                }
            }
            if !cols.is_empty() {
                let mut header = vec!["time_us", "y_clean"];
                header.extend(cols.iter().map(|(m, _)| m.as_str()));
                let data = table(
                    &header,
                    (0..ds.len()).map(|i| {
                        let mut row = vec![ds.times[i].to_string(), ds.y_clean[i].to_string()];
                        row.extend(cols.iter().map(|(_, r)| r[i].to_string()));
                        row
                    }),
                );
                let mut lines = vec![Series {
                    name: "clean".into(),
                    x: ds.times.clone(),
                    y: ds.y_clean.clone(),
                    style: Style::Line,
                }];
                lines.extend(cols.iter().map(|(m, r)| Series {
                    name: m.to_string(),
                    x: ds.times.clone(),
                    y: (*r).clone(),
                    style: Style::Line,
                }));
                // ParaQNN first so it takes the leading palette color
                lines.sort_by_key(|s| s.name != ModelKind::ParaQnn.as_str());
                let chart = Chart {
                    title: format!("{regime}: reconstruction"),
                    x_label: "time (us)".into(),
                    y_label: "P(|1>)".into(),
                    log_y: false,
                    series: lines,
                };
                emit(format!("{regime}_d_reconstruction"), data, chart)?;
            }
        }
    }
    let path = out_dir.join("summary.csv");
    write(&path, &summary_csv)?;
    summary.written.push(path);
    if !gaps.is_empty() {
        let path = out_dir.join("gaps.txt");
        write(&path, &(gaps.join("\n") + "\n"))?;
        summary.written.push(path);
    }
    summary.gaps = gaps;
    Ok(summary)
}
