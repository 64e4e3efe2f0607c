//! Equation-free reconstruction of noisy single-qubit dynamics with a
//! dual-channel (truth/falsity) paraconsistent network.
//!
//! The crate is organized bottom-up:
//!
//! - [`dyngen`]: Lindblad integration of driven, decohering qubits
//! - [`noise`]: seeded Gaussian, telegraph, 1/f and SPAM corruption
//! - [`dataio`]: dataset assembly, splits, persistence
//! - [`paranet`]: the dual-channel network with exact reverse-mode gradients
//! - [`training`]: losses, physics residuals, Adam, the training loop
//! - [`baselines`]: PINN and plain MLP comparison models
//! - [`model`]: one type over all model kinds, plus checkpoints
//! - [`bench`]: multi-seed evaluation matrix, reports and figures

pub mod baselines;
pub mod bench;
pub mod dataio;
pub mod dyngen;
pub mod error;
pub mod model;
pub mod noise;
pub mod paranet;
pub mod params;
pub mod provenance;
pub mod svg;
pub mod training;

pub use bench::{BenchConfig, BenchReport};
pub use dataio::{Dataset, RegimeConfig, Split, SplitMode};
pub use dyngen::Regime;
pub use error::{Error, ErrorCategory, Result};
pub use model::{Checkpoint, Model, ModelKind, ModelSpec};
pub use paranet::{ParaNetConfig, ParaNetParams};
pub use params::ParamSet;
pub use training::{LossWeights, Telemetry, TrainConfig, TrainMode};
