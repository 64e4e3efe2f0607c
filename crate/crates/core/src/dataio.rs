//! Dataset assembly, persistence and reload.
//!
//! On disk a dataset is a directory holding `dataset.csv`
//! (`time_us,y_clean,y_noisy,split`) and `manifest.json`, which carries the
//! full generating configuration plus a SHA-256 of the table.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dyngen::{self, DensityMatrix2, DriveSchedule, Regime};
use crate::error::{Error, Result};
use crate::noise::{self, NoiseStack, SeededRng};
use crate::provenance::{self, Stamp};

pub const DATASET_FORMAT: &str = "paraqnn-dataset";
pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const TABLE_FILE: &str = "dataset.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const TABLE_HEADER: &str = "time_us,y_clean,y_noisy,split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split label '{other}'")),
        }
    }
}

/// How the held-out test points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Uniformly random per-point assignment.
    Random,
    /// The final `holdout_fraction` of the time axis is the test set.
    TemporalHoldout,
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub regime: Regime,
    pub n_points: usize,
    pub time_span: f64,
    pub schedule: DriveSchedule,
    pub noise: NoiseStack,
    pub data_seed: u64,
    pub split_mode: SplitMode,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub holdout_fraction: f64,
    pub initial_state: DensityMatrix2,
    pub dt_internal: f64,
}

impl RegimeConfig {
    /// Published settings for `regime` with the given data seed.
    pub fn preset(regime: Regime, data_seed: u64) -> Self {
        let (n_points, time_span) = match regime {
            Regime::Rabi => (10_000, 8.0),
            Regime::Lindblad => (25_000, 5.0),
            Regime::Mixed => (50_000, 10.0),
        };
        RegimeConfig {
            regime,
            n_points,
            time_span,
            schedule: dyngen::make_regime_schedule(regime),
            noise: NoiseStack::for_regime(regime),
            data_seed,
            split_mode: SplitMode::Random,
            test_fraction: 0.2,
            val_fraction: 0.1,
            holdout_fraction: 0.15,
            initial_state: DensityMatrix2::ground(),
            dt_internal: dyngen::DEFAULT_DT,
        }
    }

    /// Multiplies the point count by `factor` (at least 16 points survive).
    pub fn scaled(mut self, factor: f64) -> Self {
        self.n_points = ((self.n_points as f64 * factor).round() as usize).max(16);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 4 {
            return Err(Error::InvalidConfig(format!(
                "n_points must be >= 4, got {}",
                self.n_points
            )));
        }
        if !(self.time_span.is_finite() && self.time_span > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "time_span must be > 0, got {}",
                self.time_span
            )));
        }
        if self.schedule.total_span() != self.time_span {
            return Err(Error::InvalidConfig(format!(
                "schedule covers [0, {}] but time_span is {}",
                self.schedule.total_span(),
                self.time_span
            )));
        }
        for (name, v) in [
            ("test_fraction", self.test_fraction),
            ("val_fraction", self.val_fraction),
            ("holdout_fraction", self.holdout_fraction),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.dt_internal.is_finite() && self.dt_internal > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt_internal must be > 0, got {}",
                self.dt_internal
            )));
        }
        self.initial_state.validate()?;
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub schema_version: u32,
    pub config: RegimeConfig,
    /// Divide physical time by this to get the network feature τ ∈ [0, 1].
    pub time_normalization_us: f64,
    pub table_sha256: String,
    pub stamp: Stamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub y_clean: Vec<f64>,
    pub y_noisy: Vec<f64>,
    pub split: Vec<Split>,
    pub manifest: Manifest,
}

/// `n` uniformly spaced points covering `[0, span]` inclusive.
pub fn time_grid(n: usize, span: f64) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| span * (i as f64 / last)).collect()
}

fn assign_splits(cfg: &RegimeConfig) -> Vec<Split> {
    let n = cfg.n_points;
    let mut rng = SeededRng::new(cfg.data_seed, "split");
    let mut split = vec![Split::Train; n];
    let pool: Vec<usize> = match cfg.split_mode {
        SplitMode::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let n_test = (cfg.test_fraction * n as f64).round() as usize;
            for &i in &idx[..n_test] {
                split[i] = Split::Test;
            }
            idx[n_test..].to_vec()
        }
        SplitMode::TemporalHoldout => {
            let n_test = (cfg.holdout_fraction * n as f64).round() as usize;
            for s in &mut split[n - n_test..] {
                *s = Split::Test;
            }
            let mut idx: Vec<usize> = (0..n - n_test).collect();
            idx.shuffle(&mut rng);
            idx
        }
    };
    let n_val = (cfg.val_fraction * pool.len() as f64).round() as usize;
    for &i in &pool[..n_val] {
        split[i] = Split::Val;
    }
    split
}

fn render_table(times: &[f64], clean: &[f64], noisy: &[f64], split: &[Split]) -> String {
    let mut out = String::with_capacity(times.len() * 64);
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for i in 0..times.len() {
        // Display on f64 prints the shortest string that parses back exactly
        out.push_str(&format!("{},{},{},{}\n", times[i], clean[i], noisy[i], split[i]));
    }
    out
}

pub fn build_dataset(cfg: &RegimeConfig) -> Result<Dataset> {
    cfg.validate()?;
    let times = time_grid(cfg.n_points, cfg.time_span);
    let y_clean = dyngen::integrate(&cfg.schedule, &cfg.initial_state, &times, cfg.dt_internal)?;
    let y_noisy = noise::corrupt(&y_clean, &cfg.noise, cfg.data_seed)?;
    let split = assign_splits(cfg);
    Dataset::from_parts(cfg, times, y_clean, y_noisy, split)
}

impl Dataset {
    /// Wraps externally produced columns. `cfg` supplies the time span used
    /// for normalization and is recorded in the manifest as-is.
    pub fn from_parts(
        cfg: &RegimeConfig,
        times: Vec<f64>,
        y_clean: Vec<f64>,
        y_noisy: Vec<f64>,
        split: Vec<Split>,
    ) -> Result<Dataset> {
        let n = times.len();
        if y_clean.len() != n || y_noisy.len() != n || split.len() != n {
            return Err(Error::Shape("dataset columns differ in length".into()));
        }
        let mut config = cfg.clone();
        config.n_points = n;
        let table = render_table(&times, &y_clean, &y_noisy, &split);
        let manifest = Manifest {
            format: DATASET_FORMAT.to_owned(),
            schema_version: DATASET_SCHEMA_VERSION,
            time_normalization_us: config.time_span,
            table_sha256: provenance::sha256_hex(table.as_bytes()),
            stamp: provenance::version_stamp(&config, &[config.data_seed]),
            config,
        };
        Ok(Dataset {
            times,
            y_clean,
            y_noisy,
            split,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn config(&self) -> &RegimeConfig {
        &self.manifest.config
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        self.split
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == which)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn table(&self) -> String {
        render_table(&self.times, &self.y_clean, &self.y_noisy, &self.split)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let table_path = dir.join(TABLE_FILE);
        fs::write(&table_path, self.table()).map_err(|e| Error::io(&table_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
        fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))
    }

    /// Loads a dataset directory, verifying schema, configuration and checksum.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&raw).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
        if manifest.format != DATASET_FORMAT || manifest.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::Schema {
                path: manifest_path,
                reason: format!(
                    "expected {DATASET_FORMAT} v{DATASET_SCHEMA_VERSION}, found {} v{}",
                    manifest.format, manifest.schema_version
                ),
            });
        }
        manifest.config.validate()?;
        manifest.stamp.check()?;
        if manifest.time_normalization_us != manifest.config.time_span {
            return Err(Error::Schema {
                path: manifest_path,
                reason: "time normalization does not match time_span".into(),
            });
        }

        let table_path = dir.join(TABLE_FILE);
        let table = fs::read(&table_path).map_err(|e| Error::io(&table_path, e))?;
        let found = provenance::sha256_hex(&table);
        if found != manifest.table_sha256 {
            return Err(Error::Checksum {
                path: table_path,
                expected: manifest.table_sha256.clone(),
                found,
            });
        }
        let text = String::from_utf8(table).map_err(|_| Error::malformed(&table_path, "not UTF-8"))?;
        let (times, y_clean, y_noisy, split) = parse_table(&table_path, &text)?;
        if times.len() != manifest.config.n_points {
            return Err(Error::malformed(
                &table_path,
                format!(
                    "{} rows but manifest declares {}",
                    times.len(),
                    manifest.config.n_points
                ),
            ));
        }
        Ok(Dataset {
            times,
            y_clean,
            y_noisy,
            split,
            manifest,
        })
    }
}

type Columns = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Split>);

fn parse_table(path: &PathBuf, text: &str) -> Result<Columns> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLE_HEADER) {
        return Err(Error::malformed(path, "missing or unexpected header"));
    }
    let (mut t, mut c, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::malformed(path, format!("row {row}: expected 4 fields")));
        }
        let num = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| Error::malformed(path, format!("row {row}: bad number '{f}'")))
        };
        t.push(num(fields[0])?);
        c.push(num(fields[1])?);
        y.push(num(fields[2])?);
        s.push(
            fields[3]
                .parse::<Split>()
                .map_err(|e| Error::malformed(path, format!("row {row}: {e}")))?,
        );
    }
    Ok((t, c, y, s))
}

/// Network input feature `τ = t / time_span`.
pub fn normalize_time(ds: &Dataset) -> Vec<f64> {
    let span = ds.manifest.time_normalization_us;
    ds.times.iter().map(|&t| normalize(t, span)).collect()
}

#[inline]
pub fn normalize(t: f64, span: f64) -> f64 {
    t / span
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(regime: Regime) -> RegimeConfig {
        RegimeConfig::preset(regime, 42).scaled(0.05)
    }

    #[test]
    fn preset_sizes() {
        let r = RegimeConfig::preset(Regime::Rabi, 42);
        assert_eq!((r.n_points, r.time_span), (10_000, 8.0));
        let l = RegimeConfig::preset(Regime::Lindblad, 42);
        assert_eq!((l.n_points, l.time_span), (25_000, 5.0));
        let m = RegimeConfig::preset(Regime::Mixed, 42);
        assert_eq!((m.n_points, m.time_span), (50_000, 10.0));
    }

    #[test]
    fn split_fractions() {
        let ds = build_dataset(&small(Regime::Lindblad)).unwrap();
        let n = ds.len();
        let test = ds.indices(Split::Test).len();
        let val = ds.indices(Split::Val).len();
        let train = ds.indices(Split::Train).len();
        assert_eq!(test + val + train, n);
        assert!((test as f64 - 0.2 * n as f64).abs() <= 1.0);
        assert!((val as f64 - 0.1 * (n - test) as f64).abs() <= 1.0);
    }

    #[test]
    fn temporal_holdout_tests_the_tail() {
        let mut cfg = small(Regime::Rabi);
        cfg.split_mode = SplitMode::TemporalHoldout;
        let ds = build_dataset(&cfg).unwrap();
        let test = ds.indices(Split::Test);
        let n_test = (0.15 * ds.len() as f64).round() as usize;
        assert_eq!(test, (ds.len() - n_test..ds.len()).collect::<Vec<_>>());
    }

    #[test]
    fn zero_noise_dataset_is_clean() {
        let mut cfg = small(Regime::Rabi);
        cfg.noise = NoiseStack::none();
        let ds = build_dataset(&cfg).unwrap();
        assert_eq!(ds.y_clean, ds.y_noisy);
    }

    #[test]
    fn seed_changes_noise_not_signal() {
        let a = build_dataset(&small(Regime::Rabi)).unwrap();
        let mut cfg = small(Regime::Rabi);
        cfg.data_seed = 7;
        let b = build_dataset(&cfg).unwrap();
        assert_eq!(a.y_clean, b.y_clean);
        assert_ne!(a.y_noisy, b.y_noisy);
    }

    #[test]
    fn normalized_time_endpoints() {
        let ds = build_dataset(&small(Regime::Rabi)).unwrap();
        let tau = normalize_time(&ds);
        assert_eq!(tau[0], 0.0);
        assert_eq!(*tau.last().unwrap(), 1.0);
        assert_eq!(normalize(4.0, 8.0), 0.5);
    }

    #[test]
    fn save_load_round_trip_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        let ds = build_dataset(&small(Regime::Mixed)).unwrap();
        ds.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), ds);

        // regenerate from the manifest alone
        let again = build_dataset(&Dataset::load(dir.path()).unwrap().manifest.config).unwrap();
        assert_eq!(again.table(), fs::read_to_string(dir.path().join(TABLE_FILE)).unwrap());

        // truncation
        let table_path = dir.path().join(TABLE_FILE);
        let full = fs::read_to_string(&table_path).unwrap();
        fs::write(&table_path, &full[..full.len() / 2]).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Checksum { .. })));
        fs::write(&table_path, &full).unwrap();

        // invalid physics inside the manifest
        let mpath = dir.path().join(MANIFEST_FILE);
        let m = fs::read_to_string(&mpath).unwrap();
        let bad = m.replacen("\"dephasing_rate_per_us\": 0.25", "\"dephasing_rate_per_us\": 0.01", 1);
        assert_ne!(bad, m);
        fs::write(&mpath, bad).unwrap();
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("T2"), "{err}");
    }
}
