use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps.is_finite()
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First and second moment estimates, one buffer per parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        let zeros: Vec<Vec<f64>> = params.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
pub fn adam_step<P: ParamSet, G: ParamSet>(
    params: &mut P,
    grads: &G,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let g_slices = grads.param_slices();
    if g_slices.len() != state.m.len()
        || g_slices.iter().zip(&state.m).any(|(g, m)| g.len() != m.len())
    {
        return Err(Error::Shape("gradient layout differs from optimizer state".into()));
    }
    if g_slices.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite {
            what: "gradient".into(),
            epoch: 0,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut p_slices = params.param_slices_mut();
    if p_slices.len() != g_slices.len() {
        return Err(Error::Shape("gradient layout differs from parameters".into()));
    }
    for (((p, g), m), v) in p_slices
        .iter_mut()
        .zip(&g_slices)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl ParamSet for Scalar {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Scalar(vec![0.3, -1.0]);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &Scalar(vec![0.0, 0.0]), &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p.0, vec![0.3, -1.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Scalar(vec![0.0]);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &Scalar(vec![1.0]), &mut st, &cfg).unwrap();
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-15);
        let first = p.0[0];
        adam_step(&mut p, &Scalar(vec![1.0]), &mut st, &cfg).unwrap();
        let second = p.0[0] - first;
        assert!((second.abs() - first.abs()).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut p = Scalar(vec![1.0]);
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &Scalar(vec![f64::NAN]), &mut st, &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        assert_eq!(p.0, vec![1.0]);
        assert_eq!(st.step(), 0);
    }
}
