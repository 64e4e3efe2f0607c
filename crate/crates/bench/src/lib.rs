//! Shared fixtures for the kernel benchmarks.

use paraqnn_core::dyngen::{self, Regime};
use paraqnn_core::{ParaNetConfig, ParaNetParams};

/// Evenly spaced sample times over the regime's full span.
pub fn regime_times(regime: Regime, n: usize) -> Vec<f64> {
    let span = dyngen::make_regime_schedule(regime).total_span();
    paraqnn_core::dataio::time_grid(n, span)
}

/// Normalized inputs in `[0, 1]`.
pub fn batch_inputs(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n.max(2) - 1) as f64).collect()
}

/// Default-width network with a fixed seed.
pub fn default_net() -> ParaNetParams {
    ParaNetParams::init(&ParaNetConfig::default(), 7).expect("default config is valid")
}
