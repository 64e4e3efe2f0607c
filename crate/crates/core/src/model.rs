//! The four trainable model kinds behind one type, and their checkpoints.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind, BaselineModel, BaselineRecord, BaselineSpec};
use crate::error::{Error, Result};
use crate::paranet::{ParaNetConfig, ParaNetParams, ParaNetRecord};
use crate::params::ParamSet;
use crate::provenance::Stamp;

pub const CHECKPOINT_FORMAT: &str = "paraqnn-checkpoint";
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "paraqnn")]
    ParaQnn,
    #[serde(rename = "pinn-incomplete")]
    PinnIncomplete,
    #[serde(rename = "pinn-known")]
    PinnKnown,
    #[serde(rename = "mlp")]
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::ParaQnn,
        ModelKind::PinnIncomplete,
        ModelKind::PinnKnown,
        ModelKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ParaQnn => "paraqnn",
            ModelKind::PinnIncomplete => "pinn-incomplete",
            ModelKind::PinnKnown => "pinn-known",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            ModelKind::ParaQnn => None,
            ModelKind::PinnIncomplete => Some(BaselineKind::PinnIncomplete),
            ModelKind::PinnKnown => Some(BaselineKind::PinnKnown),
            ModelKind::Mlp => Some(BaselineKind::Mlp),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown model '{s}' (expected one of: paraqnn, pinn-incomplete, pinn-known, mlp)"
                ))
            })
    }
}

/// Architecture and initialization settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Paraqnn(ParaNetConfig),
    Baseline(BaselineSpec),
}

impl ModelSpec {
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind.baseline() {
            None => ModelSpec::Paraqnn(ParaNetConfig::default()),
            Some(b) => ModelSpec::Baseline(BaselineSpec::new(b)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Paraqnn(_) => ModelKind::ParaQnn,
            ModelSpec::Baseline(s) => match s.kind {
                BaselineKind::PinnIncomplete => ModelKind::PinnIncomplete,
                BaselineKind::PinnKnown => ModelKind::PinnKnown,
                BaselineKind::Mlp => ModelKind::Mlp,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    ParaQnn(ParaNetParams),
    Baseline(BaselineModel),
}

impl Model {
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Model> {
        match spec {
            ModelSpec::Paraqnn(cfg) => Ok(Model::ParaQnn(ParaNetParams::init(cfg, seed)?)),
            ModelSpec::Baseline(s) => Ok(Model::Baseline(baselines::build_baseline(s, seed)?)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::ParaQnn(_) => ModelKind::ParaQnn,
            Model::Baseline(b) => ModelSpec::Baseline(b.spec.clone()).kind(),
        }
    }

    /// Signal estimate at normalized times (the truth channel for ParaQNN).
    pub fn predict(&self, tau: &[f64]) -> Vec<f64> {
        match self {
            Model::ParaQnn(net) => net.predict(tau).0,
            Model::Baseline(b) => baselines::predict(b, tau),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Model::ParaQnn(net) => Some(net.alpha()),
            Model::Baseline(_) => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::ParaQnn(net) => net.param_count(),
            Model::Baseline(b) => b.param_count(),
        }
    }

    pub fn to_record(&self) -> ModelRecord {
        match self {
            Model::ParaQnn(net) => ModelRecord::Paraqnn(net.to_record()),
            Model::Baseline(b) => ModelRecord::Baseline(b.to_record()),
        }
    }

    pub fn from_record(rec: &ModelRecord) -> Result<Model> {
        match rec {
            ModelRecord::Paraqnn(r) => Ok(Model::ParaQnn(ParaNetParams::from_record(r)?)),
            ModelRecord::Baseline(r) => Ok(Model::Baseline(BaselineModel::from_record(r)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelRecord {
    Paraqnn(ParaNetRecord),
    Baseline(BaselineRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub schema_version: u32,
    pub kind: ModelKind,
    pub model_seed: u64,
    pub model: ModelRecord,
    pub stamp: Stamp,
}

impl Checkpoint {
    pub fn new(model: &Model, model_seed: u64, stamp: Stamp) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            kind: model.kind(),
            model_seed,
            model: model.to_record(),
            stamp,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&raw).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        if ck.format != CHECKPOINT_FORMAT || ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Schema {
                path: path.to_owned(),
                reason: format!(
                    "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_SCHEMA_VERSION}, found {} v{}",
                    ck.format, ck.schema_version
                ),
            });
        }
        ck.stamp.check()?;
        Ok(ck)
    }

    pub fn model(&self) -> Result<Model> {
        let m = Model::from_record(&self.model)?;
        if m.kind() != self.kind {
            return Err(Error::InvalidInput(format!(
                "checkpoint declares {} but stores {}",
                self.kind,
                m.kind()
            )));
        }
        Ok(m)
    }
}
