//! Comparison models: PINNs with an incomplete or a known physics prior, and a
//! plain MLP. All share one tanh body with a sigmoid output.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::SeededRng;
use crate::params::{
    matrix_slice, matrix_slice_mut, sigmoid, standard, softplus, softplus_inv, vector_slice,
    vector_slice_mut, MatrixRecord, ParamSet,
};
use crate::training::physics::{PhysicsPrior, PhysicsValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    PinnIncomplete,
    PinnKnown,
    Mlp,
}

impl BaselineKind {
    pub fn prior(self) -> Option<PhysicsPrior> {
        match self {
            BaselineKind::PinnIncomplete => Some(PhysicsPrior::Incomplete),
            BaselineKind::PinnKnown => Some(PhysicsPrior::Known),
            BaselineKind::Mlp => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::PinnIncomplete => "pinn-incomplete",
            BaselineKind::PinnKnown => "pinn-known",
            BaselineKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinn-incomplete" | "pinn_incomplete" => Ok(BaselineKind::PinnIncomplete),
            "pinn-known" | "pinn_known" => Ok(BaselineKind::PinnKnown),
            "mlp" => Ok(BaselineKind::Mlp),
            _ => Err(Error::InvalidInput(format!(
                "unknown baseline '{s}' (expected one of: pinn-incomplete, pinn-known, mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub hidden: Vec<usize>,
    pub lambda_physics: f64,
    pub collocation_points: usize,
    /// Uniform half-width for layer-0 weights and biases.
    pub first_layer_scale: f64,
    /// Initial physical values: `[γ]` or `[ζ, ω, P_eq]`.
    pub physics_init: Vec<f64>,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind) -> Self {
        let (lambda_physics, physics_init) = match kind {
            BaselineKind::PinnIncomplete => (0.1, vec![0.2]),
            BaselineKind::PinnKnown => (0.1, vec![0.1, 2.0, 0.5]),
            BaselineKind::Mlp => (0.0, vec![]),
        };
        BaselineSpec {
            kind,
            hidden: vec![128; 3],
            lambda_physics,
            collocation_points: 1024,
            first_layer_scale: 16.0,
            physics_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("baseline needs non-empty hidden layers".into()));
        }
        if !(self.lambda_physics.is_finite() && self.lambda_physics >= 0.0) {
            return Err(Error::InvalidConfig("lambda_physics must be >= 0".into()));
        }
        let expected = match self.kind.prior() {
            Some(PhysicsPrior::Incomplete) => 1,
            Some(PhysicsPrior::Known) => 3,
            None => 0,
        };
        if self.physics_init.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{} expects {expected} physical parameters, got {}",
                self.kind,
                self.physics_init.len()
            )));
        }
        match self.kind.prior() {
            Some(PhysicsPrior::Incomplete) if self.physics_init[0] <= 0.0 => {
                return Err(Error::InvalidConfig("gamma must start > 0".into()))
            }
            Some(PhysicsPrior::Known) => {
                let v = &self.physics_init;
                if v[0] <= 0.0 || v[1] <= 0.0 || !(v[2] > 0.0 && v[2] < 1.0) {
                    return Err(Error::InvalidConfig(
                        "zeta, omega must start > 0 and P_eq inside (0, 1)".into(),
                    ));
                }
            }
            _ => {}
        }
        if self.kind.prior().is_some() && self.collocation_points < 3 {
            return Err(Error::InvalidConfig("collocation grid needs >= 3 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Tanh hidden layers, sigmoid scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhNet {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
pub struct TanhCache {
    activations: Vec<Array2<f64>>,
}

impl TanhNet {
    pub fn init(hidden: &[usize], first_layer_scale: f64, rng: &mut SeededRng) -> Self {
        let mut dims = vec![1];
        dims.extend(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, p)| {
                let (fan_in, fan_out) = (p[0], p[1]);
                let glorot = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let wide = i == 0 && first_layer_scale > 0.0;
                let bound = if wide { first_layer_scale } else { glorot };
                let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-1.0..1.0) * bound
                });
                let b = if wide {
                    Array1::from_shape_simple_fn(fan_out, || rng.random_range(-1.0..1.0) * bound)
                } else {
                    Array1::zeros(fan_out)
                };
                DenseLayer { w, b }
            })
            .collect();
        TanhNet { layers }
    }

    fn check(&self) -> Result<()> {
        let mut width = 1;
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.ncols() != width || l.b.len() != l.w.nrows() {
                return Err(Error::Shape(format!("baseline layer {i} has inconsistent shape")));
            }
            width = l.w.nrows();
        }
        if self.layers.is_empty() || width != 1 {
            return Err(Error::Shape("baseline network must end in width 1".into()));
        }
        Ok(())
    }

    pub fn forward(&self, tau: &[f64]) -> (Vec<f64>, TanhCache) {
        let mut x = Array2::from_shape_vec((tau.len(), 1), tau.to_vec()).expect("column shape");
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = x.dot(&l.w.t());
            z += &l.b;
            if i == last {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(std::mem::replace(&mut x, z));
        }
        let out = x.column(0).to_vec();
        activations.push(x);
        (out, TanhCache { activations })
    }

    pub fn backward(&self, cache: &TanhCache, d_out: &[f64]) -> Result<TanhNet> {
        let b = d_out.len();
        if cache.activations.len() != self.layers.len() + 1 || cache.activations[0].nrows() != b {
            return Err(Error::Shape("baseline cache does not match upstream gradient".into()));
        }
        let last = self.layers.len() - 1;
        let mut g = Array2::from_shape_vec((b, 1), d_out.to_vec()).expect("column shape");
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate().rev() {
            let a = &cache.activations[i + 1];
            if i == last {
                ndarray::Zip::from(&mut g).and(a).for_each(|g, &y| *g *= y * (1.0 - y));
            } else {
                ndarray::Zip::from(&mut g).and(a).for_each(|g, &y| *g *= 1.0 - y * y);
            }
            let input = &cache.activations[i];
            grads.push(DenseLayer {
                w: standard(g.t().dot(input)),
                b: g.sum_axis(Axis(0)),
            });
            if i > 0 {
                g = g.dot(&l.w);
            }
        }
        grads.reverse();
        Ok(TanhNet { layers: grads })
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [matrix_slice(&l.w), vector_slice(&l.b)])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [matrix_slice_mut(&mut l.w), vector_slice_mut(&mut l.b)])
            .collect()
    }
}

/// A baseline network plus its unconstrained physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub spec: BaselineSpec,
    pub net: TanhNet,
    /// `γ_raw` or `[ζ_raw, ω_raw, P_eq_raw]`; mapped through softplus
    /// (and a sigmoid for `P_eq`).
    pub physics_raw: Vec<f64>,
}

/// Gradients laid out like [`BaselineModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGrads {
    pub net: TanhNet,
    pub physics_raw: Vec<f64>,
}

pub fn build_baseline(spec: &BaselineSpec, seed: u64) -> Result<BaselineModel> {
    spec.validate()?;
    let mut rng = SeededRng::new(seed, "init/baseline");
    let net = TanhNet::init(&spec.hidden, spec.first_layer_scale, &mut rng);
    let physics_raw = match spec.kind.prior() {
        Some(PhysicsPrior::Incomplete) => vec![softplus_inv(spec.physics_init[0])],
        Some(PhysicsPrior::Known) => {
            let p = spec.physics_init[2];
            vec![
                softplus_inv(spec.physics_init[0]),
                softplus_inv(spec.physics_init[1]),
                (p / (1.0 - p)).ln(),
            ]
        }
        None => vec![],
    };
    Ok(BaselineModel {
        spec: spec.clone(),
        net,
        physics_raw,
    })
}

/// Model output at the given normalized times.
pub fn predict(model: &BaselineModel, tau: &[f64]) -> Vec<f64> {
    model.net.forward(tau).0
}

impl BaselineModel {
    pub fn physics_values(&self) -> Option<PhysicsValues> {
        let r = &self.physics_raw;
        match self.spec.kind.prior()? {
            PhysicsPrior::Incomplete => Some(PhysicsValues::Incomplete { gamma: softplus(r[0]) }),
            PhysicsPrior::Known => Some(PhysicsValues::Known {
                zeta: softplus(r[0]),
                omega: softplus(r[1]),
                p_eq: sigmoid(r[2]),
            }),
        }
    }

    /// Named physical values, for reports.
    pub fn physics_summary(&self) -> Vec<(String, f64)> {
        match self.physics_values() {
            Some(PhysicsValues::Incomplete { gamma }) => vec![("gamma".into(), gamma)],
            Some(PhysicsValues::Known { zeta, omega, p_eq }) => vec![
                ("zeta".into(), zeta),
                ("omega".into(), omega),
                ("p_eq".into(), p_eq),
            ],
            None => vec![],
        }
    }

    /// Chains gradients with respect to the constrained values back to the
    /// raw parameters.
    pub fn physics_raw_grad(&self, d_values: &[f64]) -> Vec<f64> {
        let r = &self.physics_raw;
        match self.spec.kind.prior() {
            Some(PhysicsPrior::Incomplete) => vec![d_values[0] * sigmoid(r[0])],
            Some(PhysicsPrior::Known) => {
                let pe = sigmoid(r[2]);
                vec![
                    d_values[0] * sigmoid(r[0]),
                    d_values[1] * sigmoid(r[1]),
                    d_values[2] * pe * (1.0 - pe),
                ]
            }
            None => vec![],
        }
    }

    pub fn to_record(&self) -> BaselineRecord {
        BaselineRecord {
            spec: self.spec.clone(),
            layers: self
                .net
                .layers
                .iter()
                .map(|l| DenseRecord {
                    w: (&l.w).into(),
                    b: l.b.to_vec(),
                })
                .collect(),
            physics_raw: self.physics_raw.clone(),
        }
    }

    pub fn from_record(rec: &BaselineRecord) -> Result<Self> {
        rec.spec.validate()?;
        let layers = rec
            .layers
            .iter()
            .map(|l| {
                Ok(DenseLayer {
                    w: l.w.to_array()?,
                    b: Array1::from(l.b.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = TanhNet { layers };
        net.check()?;
        if rec.physics_raw.len() != rec.spec.physics_init.len() {
            return Err(Error::Shape("physical parameter count differs from spec".into()));
        }
        Ok(BaselineModel {
            spec: rec.spec.clone(),
            net,
            physics_raw: rec.physics_raw.clone(),
        })
    }
}

impl ParamSet for BaselineModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.net.slices();
        v.push(&self.physics_raw);
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.net.slices_mut();
        v.push(&mut self.physics_raw);
        v
    }
}

impl ParamSet for BaselineGrads {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.net.slices();
        v.push(&self.physics_raw);
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.net.slices_mut();
        v.push(&mut self.physics_raw);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseRecord {
    pub w: MatrixRecord,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub spec: BaselineSpec,
    pub layers: Vec<DenseRecord>,
    pub physics_raw: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paranet::{ParaNetConfig, ParaNetParams};

    #[test]
    fn kinds_parse() {
        for k in [BaselineKind::PinnIncomplete, BaselineKind::PinnKnown, BaselineKind::Mlp] {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        let err = "rf".parse::<BaselineKind>().unwrap_err().to_string();
        assert!(err.contains("pinn-known"));
    }

    #[test]
    fn initial_physics_values() {
        let m = build_baseline(&BaselineSpec::new(BaselineKind::PinnKnown), 1).unwrap();
        match m.physics_values().unwrap() {
            PhysicsValues::Known { zeta, omega, p_eq } => {
                assert!((zeta - 0.1).abs() < 1e-12);
                assert!((omega - 2.0).abs() < 1e-12);
                assert!((p_eq - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let m = build_baseline(&BaselineSpec::new(BaselineKind::PinnIncomplete), 1).unwrap();
        assert_eq!(m.physics_summary().len(), 1);
        assert!(build_baseline(&BaselineSpec::new(BaselineKind::Mlp), 1)
            .unwrap()
            .physics_values()
            .is_none());
    }

    #[test]
    fn parameter_counts_at_equal_width_and_depth() {
        let w = 128;
        // four coupling matrices and two biases per layer, plus alpha
        let para_expected = (4 * w + 2 * w) + 2 * (4 * w * w + 2 * w) + (4 * w + 2) + 1;
        let body_expected = (w + w) + 2 * (w * w + w) + (w + 1);
        let para = ParaNetParams::init(&ParaNetConfig::default(), 42).unwrap().param_count();
        assert_eq!(para, para_expected);
        for (kind, extra) in [
            (BaselineKind::PinnIncomplete, 1),
            (BaselineKind::PinnKnown, 3),
            (BaselineKind::Mlp, 0),
        ] {
            let n = build_baseline(&BaselineSpec::new(kind), 42).unwrap().param_count();
            assert_eq!(n, body_expected + extra, "{kind}");
            let ratio = para as f64 / n as f64;
            assert!(ratio > 3.9 && ratio < 4.0, "{kind}: {ratio}");
        }
    }

    #[test]
    fn same_seed_same_init() {
        let spec = BaselineSpec::new(BaselineKind::Mlp);
        assert_eq!(build_baseline(&spec, 7).unwrap(), build_baseline(&spec, 7).unwrap());
        assert_ne!(build_baseline(&spec, 7).unwrap(), build_baseline(&spec, 8).unwrap());
    }

    #[test]
    fn outputs_in_unit_interval_and_permutation_equivariant() {
        let m = build_baseline(&BaselineSpec::new(BaselineKind::PinnKnown), 3).unwrap();
        let tau = [0.0, 0.25, 0.5, 0.75, 1.0];
        let out = predict(&m, &tau);
        assert!(out.iter().all(|&y| y > 0.0 && y < 1.0));
        let rev: Vec<f64> = tau.iter().rev().copied().collect();
        let out_rev = predict(&m, &rev);
        for i in 0..tau.len() {
            assert_eq!(out[i], out_rev[tau.len() - 1 - i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = BaselineSpec {
            hidden: vec![5, 4],
            first_layer_scale: 2.0,
            ..BaselineSpec::new(BaselineKind::Mlp)
        };
        let m = build_baseline(&spec, 11).unwrap();
        let tau = [0.1, 0.4, 0.9];
        let w = [0.3, -1.0, 0.7];
        let loss = |net: &TanhNet| -> f64 {
            net.forward(&tau).0.iter().zip(&w).map(|(y, c)| y * c).sum()
        };
        let (_, cache) = m.net.forward(&tau);
        let g = m.net.backward(&cache, &w).unwrap();
        let h = 1e-6;
        let mut probe = m.net.clone();
        let n_slices = probe.slices().len();
        for s in 0..n_slices {
            let len = probe.slices()[s].len();
            for i in 0..len {
                let orig = probe.slices()[s][i];
                probe.slices_mut()[s][i] = orig + h;
                let up = loss(&probe);
                probe.slices_mut()[s][i] = orig - h;
                let dn = loss(&probe);
                probe.slices_mut()[s][i] = orig;
                let fd = (up - dn) / (2.0 * h);
                let an = g.slices()[s][i];
                assert!((fd - an).abs() <= 1e-7 * fd.abs().max(1e-3), "slice {s} idx {i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn record_round_trip() {
        let m = build_baseline(&BaselineSpec::new(BaselineKind::PinnIncomplete), 5).unwrap();
        let json = serde_json::to_string(&m.to_record()).unwrap();
        let back = BaselineModel::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
