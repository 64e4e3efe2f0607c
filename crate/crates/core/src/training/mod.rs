//! Losses, optimizer and the mini-batch training loop shared by all models.

pub mod adam;
pub mod loss;
pub mod physics;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineGrads, BaselineModel};
use crate::dataio::{self, Dataset, Split};
use crate::dyngen::Regime;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::noise::SeededRng;
use crate::paranet::{ParaNetGrads, ParaNetParams};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{
    loss_contradiction, loss_experimental, loss_noise, loss_signal, paraconsistent_loss, DualLoss,
    Loss, LossParts, LossWeights,
};
pub use physics::{collocation_grid, pinn_residual, PhysicsLoss, PhysicsPrior, PhysicsValues};

/// Largest batch pushed through a network at once during evaluation.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Signal target is the clean trace.
    Benchmark,
    /// Only the noisy observation is used.
    Experimental,
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(TrainMode::Benchmark),
            "experimental" => Ok(TrainMode::Experimental),
            _ => Err(Error::InvalidInput(format!(
                "unknown mode '{s}' (expected one of: benchmark, experimental)"
            ))),
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Benchmark => "benchmark",
            TrainMode::Experimental => "experimental",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub model_seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn preset(regime: Regime, model_seed: u64) -> Self {
        let (epochs, batch_size) = match regime {
            Regime::Rabi => (1500, 256),
            Regime::Lindblad => (2000, 256),
            Regime::Mixed => (4000, 512),
        };
        TrainConfig {
            epochs,
            batch_size,
            model_seed,
            adam: AdamConfig::default(),
        }
    }

    /// Multiplies the epoch count by `factor`, keeping at least one epoch.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.epochs = ((self.epochs as f64 * factor).round() as usize).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be >= 1".into()));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub alpha: Option<f64>,
}

pub const TELEMETRY_HEADER: &str = "epoch,train_loss,val_loss,alpha";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    /// Row 0 is the untrained model; row `e` follows epoch `e`.
    pub epochs: Vec<EpochRecord>,
    pub test_mse_clean: f64,
    pub test_mse_noisy: f64,
    /// Fraction of test points with `t̂ + f̂ > 1` (ParaQNN only).
    pub contradiction_rate: Option<f64>,
    /// Learned physical values (PINNs only).
    pub physics: Vec<(String, f64)>,
    pub wall_clock_s: f64,
}

impl Telemetry {
    pub fn alpha_series(&self) -> Vec<f64> {
        self.epochs.iter().filter_map(|r| r.alpha).collect()
    }

    /// Per-epoch table; wall-clock time is deliberately left out so the file
    /// is reproducible.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(TELEMETRY_HEADER);
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.alpha)
            ));
        }
        out
    }
}

/// Parses a table written by [`Telemetry::to_csv`].
pub fn parse_telemetry_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let bad = |row: usize, why: String| Error::InvalidInput(format!("telemetry row {row}: {why}"));
    let mut lines = text.lines();
    if lines.next() != Some(TELEMETRY_HEADER) {
        return Err(Error::InvalidInput("telemetry header missing".into()));
    }
    let num = |row: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| bad(row, format!("'{s}': {e}")))
    };
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(row, format!("expected 4 columns, found {}", cols.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(row, s).map(Some)
            }
        };
        out.push(EpochRecord {
            epoch: cols[0].parse().map_err(|e| bad(row, format!("epoch: {e}")))?,
            train_loss: num(row, cols[1])?,
            val_loss: opt(cols[2])?,
            alpha: opt(cols[3])?,
        });
    }
    Ok(out)
}

/// Training data in the form the objectives consume.
struct Context<'a> {
    tau: Vec<f64>,
    ds: &'a Dataset,
    weights: LossWeights,
    mode: TrainMode,
    // collocation grid (normalized) and its physical spacing, PINNs only
    grid_tau: Vec<f64>,
    grid_h: f64,
}

enum Grads {
    Para(ParaNetGrads),
    Base(BaselineGrads),
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn para_objective(
    net: &ParaNetParams,
    ctx: &Context,
    idx: &[usize],
    want_grad: bool,
) -> Result<(f64, Option<ParaNetGrads>)> {
    let tau = gather(&ctx.tau, idx);
    let y = gather(&ctx.ds.y_noisy, idx);
    let out = net.forward(&tau);
    let loss = match ctx.mode {
        TrainMode::Benchmark => {
            let t_star = gather(&ctx.ds.y_clean, idx);
            paraconsistent_loss(&out.t_hat, &out.f_hat, &y, &t_star, &ctx.weights)?.0
        }
        TrainMode::Experimental => loss_experimental(&out.t_hat, &out.f_hat, &y, &ctx.weights)?,
    };
    let grads = if want_grad {
        Some(net.backward(&out.cache, &loss.d_t, &loss.d_f)?)
    } else {
        None
    };
    Ok((loss.value, grads))
}

fn baseline_objective(
    model: &BaselineModel,
    ctx: &Context,
    idx: &[usize],
    want_grad: bool,
) -> Result<(f64, Option<BaselineGrads>)> {
    let b = idx.len();
    let lambda = model.spec.lambda_physics;
    let physics = model.physics_values().filter(|_| lambda > 0.0);
    let mut tau = gather(&ctx.tau, idx);
    if physics.is_some() {
        tau.extend_from_slice(&ctx.grid_tau);
    }
    let (out, cache) = model.net.forward(&tau);
    let y = gather(&ctx.ds.y_noisy, idx);
    let data = loss_signal(&out[..b], &y)?;
    let mut value = data.value;
    let mut upstream = data.grad;
    let mut physics_raw = vec![0.0; model.physics_raw.len()];
    if let Some(values) = physics {
        let res = pinn_residual(&out[b..], ctx.grid_h, &values)?;
        value += lambda * res.value;
        upstream.extend(res.d_p.iter().map(|g| lambda * g));
        let scaled: Vec<f64> = res.d_values.iter().map(|g| lambda * g).collect();
        physics_raw = model.physics_raw_grad(&scaled);
    }
    if !want_grad {
        return Ok((value, None));
    }
    let net = model.net.backward(&cache, &upstream)?;
    Ok((value, Some(BaselineGrads { net, physics_raw })))
}

fn objective(model: &Model, ctx: &Context, idx: &[usize], want_grad: bool) -> Result<(f64, Option<Grads>)> {
    match model {
        Model::ParaQnn(net) => {
            let (v, g) = para_objective(net, ctx, idx, want_grad)?;
            Ok((v, g.map(Grads::Para)))
        }
        Model::Baseline(m) => {
            let (v, g) = baseline_objective(m, ctx, idx, want_grad)?;
            Ok((v, g.map(Grads::Base)))
        }
    }
}

/// Sample-weighted mean objective over `idx`, evaluated in chunks.
fn mean_objective(model: &Model, ctx: &Context, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(EVAL_CHUNK) {
        total += objective(model, ctx, chunk, false)?.0 * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64)
}

enum Optimizer {
    Para(AdamState),
    Base(AdamState),
}

fn apply(model: &mut Model, grads: Grads, opt: &mut Optimizer, cfg: &AdamConfig) -> Result<()> {
    match (model, grads, opt) {
        (Model::ParaQnn(net), Grads::Para(g), Optimizer::Para(st)) => adam_step(net, &g, st, cfg),
        (Model::Baseline(m), Grads::Base(g), Optimizer::Base(st)) => adam_step(m, &g, st, cfg),
        _ => Err(Error::Shape("gradient family differs from model family".into())),
    }
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, epoch },
        other => other,
    }
}

fn finite(value: f64, what: &str, epoch: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            what: what.into(),
            epoch,
        })
    }
}

/// Truth and falsity outputs over a full set of inputs, in bounded chunks.
pub fn paranet_outputs(net: &ParaNetParams, tau: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::with_capacity(tau.len());
    let mut f = Vec::with_capacity(tau.len());
    for chunk in tau.chunks(EVAL_CHUNK) {
        let (a, b) = net.predict(chunk);
        t.extend(a);
        f.extend(b);
    }
    (t, f)
}

/// Model signal estimate over a full set of inputs, in bounded chunks.
pub fn predict_all(model: &Model, tau: &[f64]) -> Vec<f64> {
    tau.chunks(EVAL_CHUNK).flat_map(|c| model.predict(c)).collect()
}

/// Mini-batch Adam training.
///
/// ParaQNN minimizes the composite loss of `mode`. Baselines always fit the
/// noisy observation plus `lambda_physics` times their residual on a
/// uniform collocation grid spanning the training times. Test metrics are
/// computed on the held-out split after the last epoch.
pub fn train(
    model: &mut Model,
    ds: &Dataset,
    weights: &LossWeights,
    cfg: &TrainConfig,
    mode: TrainMode,
) -> Result<Telemetry> {
    cfg.validate()?;
    weights.validate()?;
    let started = Instant::now();
    let train_idx = ds.indices(Split::Train);
    let val_idx = ds.indices(Split::Val);
    let test_idx = ds.indices(Split::Test);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Missing("dataset needs non-empty train and test splits".into()));
    }

    let span = ds.manifest.time_normalization_us;
    let (mut grid_tau, mut grid_h) = (Vec::new(), 0.0);
    if let Model::Baseline(m) = &*model {
        if m.spec.kind.prior().is_some() {
            let lo = train_idx.iter().map(|&i| ds.times[i]).fold(f64::INFINITY, f64::min);
            let hi = train_idx.iter().map(|&i| ds.times[i]).fold(f64::NEG_INFINITY, f64::max);
            let grid = collocation_grid(lo, hi, m.spec.collocation_points)?;
            grid_h = grid[1] - grid[0];
            grid_tau = grid.iter().map(|&t| dataio::normalize(t, span)).collect();
        }
    }
    let ctx = Context {
        tau: dataio::normalize_time(ds),
        ds,
        weights: *weights,
        mode,
        grid_tau,
        grid_h,
    };

    let mut opt = match &*model {
        Model::ParaQnn(net) => Optimizer::Para(AdamState::new(net)),
        Model::Baseline(m) => Optimizer::Base(AdamState::new(m)),
    };
    let val_loss = |model: &Model, epoch: usize| -> Result<Option<f64>> {
        if val_idx.is_empty() {
            return Ok(None);
        }
        Ok(Some(finite(mean_objective(model, &ctx, &val_idx)?, "validation loss", epoch)?))
    };

    let mut records = Vec::with_capacity(cfg.epochs + 1);
    records.push(EpochRecord {
        epoch: 0,
        train_loss: finite(mean_objective(model, &ctx, &train_idx)?, "training loss", 0)?,
        val_loss: val_loss(model, 0)?,
        alpha: model.alpha(),
    });

    let mut rng = SeededRng::new(cfg.model_seed, "shuffle");
    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (value, grads) = objective(model, &ctx, batch, true)?;
            total += finite(value, "training loss", epoch)? * batch.len() as f64;
            let grads = grads.expect("gradients requested");
            apply(model, grads, &mut opt, &cfg.adam).map_err(|e| with_epoch(e, epoch))?;
        }
        let alpha = model.alpha();
        if let Some(a) = alpha {
            finite(a, "alpha", epoch)?;
        }
        records.push(EpochRecord {
            epoch,
            train_loss: total / order.len() as f64,
            val_loss: val_loss(model, epoch)?,
            alpha,
        });
    }

    let test_tau = gather(&ctx.tau, &test_idx);
    let clean = gather(&ds.y_clean, &test_idx);
    let noisy = gather(&ds.y_noisy, &test_idx);
    let (pred, contradiction_rate) = match &*model {
        Model::ParaQnn(net) => {
            let (t, f) = paranet_outputs(net, &test_tau);
            let n_contra = t.iter().zip(&f).filter(|(a, b)| *a + *b > 1.0).count();
            (t, Some(n_contra as f64 / test_idx.len() as f64))
        }
        Model::Baseline(_) => (predict_all(model, &test_tau), None),
    };
    let physics = match &*model {
        Model::Baseline(m) => m.physics_summary(),
        Model::ParaQnn(_) => Vec::new(),
    };
    Ok(Telemetry {
        epochs: records,
        test_mse_clean: crate::bench::mse(&pred, &clean)?,
        test_mse_noisy: crate::bench::mse(&pred, &noisy)?,
        contradiction_rate,
        physics,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}
