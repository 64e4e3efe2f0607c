//! Dual-channel paraconsistent network.
//!
//! Every neuron carries a truth value `t` and a falsity value `f`. A layer
//! couples both channels linearly,
//!
//! ```text
//! z_t = W_tt·t + W_tf·f + b_t
//! z_f = W_ff·f + W_ft·t + b_f
//! ```
//!
//! and the activation lets falsity suppress truth through one shared,
//! learnable coefficient `α > 0`:
//!
//! ```text
//! t_out = σ(k·(z_t − α·z_f)),   f_out = σ(k·z_f)
//! ```
//!
//! `α` is stored as `softplus(alpha_raw)` so unconstrained gradient steps
//! never make it non-positive. The scalar input `τ` feeds both channels of
//! layer 0.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::SeededRng;
use crate::params::{
    matrix_slice, matrix_slice_mut, sigmoid, standard, softplus, softplus_inv, vector_slice,
    vector_slice_mut, MatrixRecord, ParamSet,
};

/// Truth/falsity evidence pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValue {
    pub t: f64,
    pub f: f64,
}

/// Paraconsistent interaction activation for one neuron.
#[inline]
pub fn piaf(z_t: f64, z_f: f64, alpha: f64, k: f64) -> DualValue {
    DualValue {
        t: sigmoid(k * (z_t - alpha * z_f)),
        f: sigmoid(k * z_f),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaNetConfig {
    pub hidden: Vec<usize>,
    /// Activation sharpness; fixed during training.
    pub k: f64,
    pub alpha_init: f64,
    /// Half-width of the uniform init of the truth rows of layer 0 and their
    /// biases. Sets the frequency content available at the start of training.
    pub first_layer_scale: f64,
    /// Multiplies the glorot bounds of the output layer. At 0 the network
    /// starts at t̂ = f̂ = ½, away from the saturated sigmoid plateaus.
    #[serde(default)]
    pub output_scale: f64,
}

impl Default for ParaNetConfig {
    fn default() -> Self {
        ParaNetConfig {
            hidden: vec![128; 3],
            k: 4.0,
            alpha_init: 6.0,
            first_layer_scale: 8.0,
            output_scale: 0.0,
        }
    }
}

impl ParaNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be > 0, got {}", self.k)));
        }
        if !(self.alpha_init.is_finite() && self.alpha_init > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_init must be > 0, got {}",
                self.alpha_init
            )));
        }
        if !(self.first_layer_scale.is_finite() && self.first_layer_scale >= 0.0) {
            return Err(Error::InvalidConfig("first_layer_scale must be >= 0".into()));
        }
        if !(self.output_scale.is_finite() && self.output_scale >= 0.0) {
            return Err(Error::InvalidConfig("output_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Weights of one cross-coupled layer; matrices are `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParaLayerParams {
    pub w_tt: Array2<f64>,
    pub w_tf: Array2<f64>,
    pub w_ft: Array2<f64>,
    pub w_ff: Array2<f64>,
    pub b_t: Array1<f64>,
    pub b_f: Array1<f64>,
}

impl ParaLayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        let m = || Array2::zeros((out_dim, in_dim));
        ParaLayerParams {
            w_tt: m(),
            w_tf: m(),
            w_ft: m(),
            w_ff: m(),
            b_t: Array1::zeros(out_dim),
            b_f: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_tt.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w_tt.nrows()
    }

    fn check_shape(&self) -> Result<()> {
        let s = self.w_tt.dim();
        if self.w_tf.dim() != s || self.w_ft.dim() != s || self.w_ff.dim() != s {
            return Err(Error::Shape("the four coupling matrices differ in shape".into()));
        }
        if self.b_t.len() != s.0 || self.b_f.len() != s.0 {
            return Err(Error::Shape("bias length differs from layer width".into()));
        }
        Ok(())
    }

    fn slices(&self) -> [&[f64]; 6] {
        [
            matrix_slice(&self.w_tt),
            matrix_slice(&self.w_tf),
            matrix_slice(&self.w_ft),
            matrix_slice(&self.w_ff),
            vector_slice(&self.b_t),
            vector_slice(&self.b_f),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            matrix_slice_mut(&mut self.w_tt),
            matrix_slice_mut(&mut self.w_tf),
            matrix_slice_mut(&mut self.w_ft),
            matrix_slice_mut(&mut self.w_ff),
            vector_slice_mut(&mut self.b_t),
            vector_slice_mut(&mut self.b_f),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParaNetParams {
    layers: Vec<ParaLayerParams>,
    alpha_raw: f64,
    k: f64,
    // bumped on every mutable access; ties forward caches to a parameter state
    revision: u64,
}

fn uniform_matrix(rng: &mut SeededRng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0) * bound)
}

impl ParaNetParams {
    /// Assembles a network from explicit layers. Widths must chain from 1 to 1.
    pub fn from_layers(layers: Vec<ParaLayerParams>, alpha: f64, k: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        let mut width = 1;
        for (i, layer) in layers.iter().enumerate() {
            layer.check_shape()?;
            if layer.in_dim() != width {
                return Err(Error::Shape(format!(
                    "layer {i} expects width {} but receives {width}",
                    layer.in_dim()
                )));
            }
            width = layer.out_dim();
        }
        if width != 1 {
            return Err(Error::Shape(format!("network output width is {width}, expected 1")));
        }
        if !(alpha.is_finite() && alpha > 0.0 && k.is_finite() && k > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha and k must be positive, got alpha={alpha}, k={k}"
            )));
        }
        Ok(ParaNetParams {
            layers,
            alpha_raw: softplus_inv(alpha),
            k,
            revision: 0,
        })
    }

    pub(crate) fn from_raw(layers: Vec<ParaLayerParams>, alpha_raw: f64, k: f64) -> Result<Self> {
        let mut net = Self::from_layers(layers, 1.0, k)?;
        if !alpha_raw.is_finite() {
            return Err(Error::InvalidConfig("alpha_raw is not finite".into()));
        }
        net.alpha_raw = alpha_raw;
        Ok(net)
    }

    /// Seeded initialization.
    ///
    /// Glorot-uniform bounds everywhere, except that the falsity rows
    /// (`W_ft`, `W_ff`) are divided by `α₀` so `α·z_f` starts at the scale of
    /// `z_t`, and the truth rows of layer 0 plus `b_t` are drawn from
    /// `±first_layer_scale`. The output layer is scaled by `output_scale`.
    /// Other biases start at zero.
    pub fn init(config: &ParaNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(seed, "init/paraqnn");
        let mut dims = vec![1];
        dims.extend(&config.hidden);
        dims.push(1);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let glorot = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let falsity = glorot / config.alpha_init;
            let mut layer = ParaLayerParams::zeros(fan_in, fan_out);
            if i == 0 && config.first_layer_scale > 0.0 {
                let s = config.first_layer_scale;
                layer.w_tt = uniform_matrix(&mut rng, fan_out, fan_in, s);
                layer.w_tf = uniform_matrix(&mut rng, fan_out, fan_in, s);
                layer.b_t = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-1.0..1.0) * s);
            } else {
                layer.w_tt = uniform_matrix(&mut rng, fan_out, fan_in, glorot);
                layer.w_tf = uniform_matrix(&mut rng, fan_out, fan_in, glorot);
            }
            layer.w_ft = uniform_matrix(&mut rng, fan_out, fan_in, falsity);
            layer.w_ff = uniform_matrix(&mut rng, fan_out, fan_in, falsity);
            if i + 2 == dims.len() {
                for w in [&mut layer.w_tt, &mut layer.w_tf, &mut layer.w_ft, &mut layer.w_ff] {
                    w.mapv_inplace(|x| x * config.output_scale);
                }
            }
            layers.push(layer);
        }
        Self::from_layers(layers, config.alpha_init, config.k)
    }

    pub fn layers(&self) -> &[ParaLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ParaLayerParams] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn alpha(&self) -> f64 {
        softplus(self.alpha_raw)
    }

    pub fn alpha_raw(&self) -> f64 {
        self.alpha_raw
    }

    pub fn set_alpha_raw(&mut self, raw: f64) {
        self.revision += 1;
        self.alpha_raw = raw;
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim())
            .collect()
    }

    /// Forward pass over a batch of normalized times, keeping what backward
    /// needs.
    pub fn forward(&self, tau: &[f64]) -> ParaForward {
        let alpha = self.alpha();
        let k = self.k;
        let b = tau.len();
        let mut t = Array2::from_shape_vec((b, 1), tau.to_vec()).expect("column shape");
        let mut f = t.clone();
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut z_t = t.dot(&layer.w_tt.t());
            z_t += &f.dot(&layer.w_tf.t());
            z_t += &layer.b_t;
            let mut z_f = f.dot(&layer.w_ff.t());
            z_f += &t.dot(&layer.w_ft.t());
            z_f += &layer.b_f;

            let mut t_out = z_t;
            ndarray::Zip::from(&mut t_out)
                .and(&z_f)
                .for_each(|zt, &zf| *zt = sigmoid(k * (*zt - alpha * zf)));
            let f_out = z_f.mapv(|zf| sigmoid(k * zf));
            let t_in = std::mem::replace(&mut t, t_out);
            let f_in = std::mem::replace(&mut f, f_out);
            steps.push(LayerCache { t_in, f_in, z_f });
        }
        let t_hat = t.column(0).to_vec();
        let f_hat = f.column(0).to_vec();
        let mut t_outs = Vec::with_capacity(steps.len());
        let mut f_outs = Vec::with_capacity(steps.len());
        for step in &steps[1..] {
            t_outs.push(step.t_in.clone());
            f_outs.push(step.f_in.clone());
        }
        t_outs.push(t);
        f_outs.push(f);
        ParaForward {
            t_hat,
            f_hat,
            cache: ForwardCache {
                revision: self.revision,
                batch: b,
                alpha,
                steps,
                t_outs,
                f_outs,
            },
        }
    }

    /// Truth and falsity outputs without retaining a cache.
    pub fn predict(&self, tau: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let out = self.forward(tau);
        (out.t_hat, out.f_hat)
    }

    /// Reverse-mode gradients of a scalar loss given its derivatives with
    /// respect to `t_hat` and `f_hat`.
    pub fn backward(&self, cache: &ForwardCache, d_t_hat: &[f64], d_f_hat: &[f64]) -> Result<ParaNetGrads> {
        if cache.revision != self.revision {
            return Err(Error::StaleCache(format!(
                "cache from parameter revision {} used with revision {}",
                cache.revision, self.revision
            )));
        }
        if cache.steps.len() != self.layers.len() {
            return Err(Error::StaleCache("cache depth differs from network depth".into()));
        }
        if d_t_hat.len() != cache.batch || d_f_hat.len() != cache.batch {
            return Err(Error::Shape(format!(
                "upstream gradients have lengths {}/{} for a batch of {}",
                d_t_hat.len(),
                d_f_hat.len(),
                cache.batch
            )));
        }
        let alpha = cache.alpha;
        let k = self.k;
        let b = cache.batch;
        let mut g_t = Array2::from_shape_vec((b, 1), d_t_hat.to_vec()).expect("column shape");
        let mut g_f = Array2::from_shape_vec((b, 1), d_f_hat.to_vec()).expect("column shape");
        let mut d_alpha = 0.0;
        let mut grads: Vec<ParaLayerParams> = Vec::with_capacity(self.layers.len());

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let step = &cache.steps[l];
            let t_out = &cache.t_outs[l];
            let f_out = &cache.f_outs[l];
            if t_out.dim() != (b, layer.out_dim()) || step.t_in.ncols() != layer.in_dim() {
                return Err(Error::StaleCache(format!("layer {l} cache shape mismatch")));
            }

            // du: gradient w.r.t. (z_t − α z_f)
            let mut du = g_t;
            ndarray::Zip::from(&mut du)
                .and(t_out)
                .for_each(|g, &t| *g *= k * t * (1.0 - t));
            let mut dz_f = g_f;
            ndarray::Zip::from(&mut dz_f)
                .and(f_out)
                .and(&du)
                .and(&step.z_f)
                .for_each(|g, &f, &u, &zf| {
                    *g = *g * k * f * (1.0 - f) - alpha * u;
                    d_alpha -= u * zf;
                });
            let dz_t = du;

            let grad = ParaLayerParams {
                w_tt: standard(dz_t.t().dot(&step.t_in)),
                w_tf: standard(dz_t.t().dot(&step.f_in)),
                w_ft: standard(dz_f.t().dot(&step.t_in)),
                w_ff: standard(dz_f.t().dot(&step.f_in)),
                b_t: dz_t.sum_axis(Axis(0)),
                b_f: dz_f.sum_axis(Axis(0)),
            };
            grads.push(grad);

            if l > 0 {
                let mut nt = dz_t.dot(&layer.w_tt);
                nt += &dz_f.dot(&layer.w_ft);
                let mut nf = dz_t.dot(&layer.w_tf);
                nf += &dz_f.dot(&layer.w_ff);
                g_t = nt;
                g_f = nf;
            } else {
                g_t = Array2::zeros((0, 0));
                g_f = Array2::zeros((0, 0));
            }
        }
        let _ = (g_t, g_f);
        grads.reverse();
        Ok(ParaNetGrads {
            layers: grads,
            alpha,
            d_alpha,
            alpha_raw: d_alpha * sigmoid(self.alpha_raw),
        })
    }

    pub fn to_record(&self) -> ParaNetRecord {
        ParaNetRecord {
            k: self.k,
            alpha_raw: self.alpha_raw,
            layers: self
                .layers
                .iter()
                .map(|l| ParaLayerRecord {
                    w_tt: (&l.w_tt).into(),
                    w_tf: (&l.w_tf).into(),
                    w_ft: (&l.w_ft).into(),
                    w_ff: (&l.w_ff).into(),
                    b_t: l.b_t.to_vec(),
                    b_f: l.b_f.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &ParaNetRecord) -> Result<Self> {
        let layers = rec
            .layers
            .iter()
            .map(|l| {
                Ok(ParaLayerParams {
                    w_tt: l.w_tt.to_array()?,
                    w_tf: l.w_tf.to_array()?,
                    w_ft: l.w_ft.to_array()?,
                    w_ff: l.w_ff.to_array()?,
                    b_t: Array1::from(l.b_t.clone()),
                    b_f: Array1::from(l.b_f.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_raw(layers, rec.alpha_raw, rec.k)
    }
}

impl ParamSet for ParaNetParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.slices()).collect();
        v.push(std::slice::from_ref(&self.alpha_raw));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision += 1;
        let mut v: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect();
        v.push(std::slice::from_mut(&mut self.alpha_raw));
        v
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    t_in: Array2<f64>,
    f_in: Array2<f64>,
    z_f: Array2<f64>,
}

/// Activations retained from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    batch: usize,
    alpha: f64,
    steps: Vec<LayerCache>,
    t_outs: Vec<Array2<f64>>,
    f_outs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone)]
pub struct ParaForward {
    pub t_hat: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub cache: ForwardCache,
}

/// Gradients laid out like [`ParaNetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParaNetGrads {
    pub layers: Vec<ParaLayerParams>,
    /// `α` at the time of the forward pass.
    pub alpha: f64,
    /// dL/dα.
    pub d_alpha: f64,
    /// dL/d(alpha_raw) = dL/dα · σ(alpha_raw).
    pub alpha_raw: f64,
}

impl ParaNetGrads {
    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &ParaNetGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.slices_mut().into_iter().zip(b.slices()) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        }
        self.d_alpha += other.d_alpha;
        self.alpha_raw += other.alpha_raw;
    }
}

impl ParamSet for ParaNetGrads {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.slices()).collect();
        v.push(std::slice::from_ref(&self.alpha_raw));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect();
        v.push(std::slice::from_mut(&mut self.alpha_raw));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaLayerRecord {
    pub w_tt: MatrixRecord,
    pub w_tf: MatrixRecord,
    pub w_ft: MatrixRecord,
    pub w_ff: MatrixRecord,
    pub b_t: Vec<f64>,
    pub b_f: Vec<f64>,
}

/// Serialized network state (the unconstrained `alpha_raw`, not `α`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaNetRecord {
    pub k: f64,
    pub alpha_raw: f64,
    pub layers: Vec<ParaLayerRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ParaNetConfig {
        ParaNetConfig {
            hidden: vec![4, 3],
            k: 1.0,
            alpha_init: 6.0,
            first_layer_scale: 1.0,
            output_scale: 1.0,
        }
    }

    #[test]
    fn piaf_values() {
        let z = piaf(0.0, 0.0, 3.3, 1.0);
        assert_eq!((z.t, z.f), (0.5, 0.5));
        let v = piaf(1.0, 0.5, 6.0, 1.0);
        assert!((v.t - 0.11920292202211755).abs() < 1e-15);
        assert!((v.f - 0.6224593312018546).abs() < 1e-15);
        assert_eq!(piaf(0.7, 0.0, 1.0, 2.0), piaf(0.7, 0.0, 9.0, 2.0));
    }

    #[test]
    fn alpha_starts_at_configured_value() {
        let net = ParaNetParams::init(&ParaNetConfig::default(), 42).unwrap();
        assert!((net.alpha() - 6.0).abs() < 1e-12);
        assert_eq!(net.hidden_widths(), vec![128, 128, 128]);
    }

    #[test]
    fn zero_weights_give_input_independent_output() {
        let layers = vec![ParaLayerParams::zeros(1, 3), ParaLayerParams::zeros(3, 1)];
        let net = ParaNetParams::from_layers(layers, 6.0, 1.0).unwrap();
        let (t, f) = net.predict(&[0.0, 0.3, 1.0]);
        assert!(t.iter().all(|&v| v == t[0]));
        assert!(f.iter().all(|&v| v == 0.5));
        // last layer: z_t = z_f = 0
        assert_eq!(t[0], 0.5);
    }

    #[test]
    fn batch_invariance() {
        let net = ParaNetParams::init(&small_config(), 3).unwrap();
        let tau: Vec<f64> = (0..17).map(|i| i as f64 / 16.0).collect();
        let (t_all, f_all) = net.predict(&tau);
        for (i, &x) in tau.iter().enumerate() {
            let (t, f) = net.predict(&[x]);
            assert!((t[0] - t_all[i]).abs() <= 1e-15);
            assert!((f[0] - f_all[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn shape_errors_at_construction() {
        let bad = vec![ParaLayerParams::zeros(2, 3), ParaLayerParams::zeros(3, 1)];
        assert!(ParaNetParams::from_layers(bad, 1.0, 1.0).is_err());
        let bad_out = vec![ParaLayerParams::zeros(1, 3), ParaLayerParams::zeros(3, 2)];
        assert!(ParaNetParams::from_layers(bad_out, 1.0, 1.0).is_err());
        let mut ragged = ParaLayerParams::zeros(1, 3);
        ragged.w_ft = Array2::zeros((2, 1));
        assert!(ParaNetParams::from_layers(vec![ragged, ParaLayerParams::zeros(3, 1)], 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = ParaNetParams::init(&small_config(), 5).unwrap();
        let out = net.forward(&[0.1, 0.7]);
        let g = net.backward(&out.cache, &[0.0; 2], &[0.0; 2]).unwrap();
        assert!(g.param_slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_neuron_alpha_gradient() {
        // one layer 1 → 1 with z_t = 1, z_f = 0.5 for input τ = 1
        let mut layer = ParaLayerParams::zeros(1, 1);
        layer.w_tt[[0, 0]] = 1.0;
        layer.w_ff[[0, 0]] = 0.5;
        let net = ParaNetParams::from_layers(vec![layer], 6.0, 1.0).unwrap();
        let out = net.forward(&[1.0]);
        let g = net.backward(&out.cache, &[1.0], &[0.0]).unwrap();
        let s = sigmoid(-2.0);
        let expected = -0.5 * s * (1.0 - s);
        assert!((g.d_alpha - expected).abs() < 1e-15);
        assert!((g.d_alpha - -0.052_500).abs() < 5e-6);

        // central difference in α
        let h = 1e-6;
        let t_at = |a: f64| {
            let mut n = net.clone();
            n.set_alpha_raw(softplus_inv(a));
            n.predict(&[1.0]).0[0]
        };
        let fd = (t_at(6.0 + h) - t_at(6.0 - h)) / (2.0 * h);
        assert!((fd - g.d_alpha).abs() < 1e-8);
    }

    #[test]
    fn alpha_gradient_vanishes_without_falsity_preactivation() {
        let mut layers = vec![ParaLayerParams::zeros(1, 3), ParaLayerParams::zeros(3, 1)];
        layers[0].w_tt = Array2::from_elem((3, 1), 0.7);
        layers[1].w_tt = Array2::from_elem((1, 3), -1.2);
        layers[1].b_t[0] = 0.3;
        let net = ParaNetParams::from_layers(layers, 2.0, 1.5).unwrap();
        let out = net.forward(&[0.2, 0.5, 0.9]);
        let g = net.backward(&out.cache, &[0.3, -1.0, 2.0], &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(g.d_alpha, 0.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = ParaNetParams::init(&small_config(), 5).unwrap();
        let out = net.forward(&[0.1]);
        net.param_slices_mut();
        assert!(matches!(
            net.backward(&out.cache, &[1.0], &[0.0]),
            Err(Error::StaleCache(_))
        ));
        let out = net.forward(&[0.1, 0.2]);
        assert!(matches!(net.backward(&out.cache, &[1.0], &[0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn record_round_trip_is_exact() {
        let net = ParaNetParams::init(&small_config(), 11).unwrap();
        let json = serde_json::to_string(&net.to_record()).unwrap();
        let back = ParaNetParams::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.to_record(), net.to_record());
        assert_eq!(back.predict(&[0.3]), net.predict(&[0.3]));
    }

    #[test]
    fn all_gradients_match_finite_differences() {
        let cfg = ParaNetConfig {
            hidden: vec![4],
            k: 4.0,
            alpha_init: 6.0,
            first_layer_scale: 2.0,
            output_scale: 1.0,
        };
        let net = ParaNetParams::init(&cfg, 17).unwrap();
        let tau = [0.05, 0.4, 0.75];
        let (ct, cf) = ([0.7, -0.2, 1.1], [0.3, 0.9, -0.6]);
        let objective = |n: &ParaNetParams| {
            let (t, f) = n.predict(&tau);
            (0..3).map(|i| ct[i] * t[i] + cf[i] * f[i]).sum::<f64>()
        };
        let out = net.forward(&tau);
        let g = net.backward(&out.cache, &ct, &cf).unwrap();
        let analytic: Vec<f64> = g.param_slices().concat();
        let mut probe = net.clone();
        let h = 1e-6;
        let mut k = 0;
        let n_slices = probe.param_slices().len();
        for s in 0..n_slices {
            for i in 0..probe.param_slices()[s].len() {
                let orig = probe.param_slices()[s][i];
                probe.param_slices_mut()[s][i] = orig + h;
                let up = objective(&probe);
                probe.param_slices_mut()[s][i] = orig - h;
                let dn = objective(&probe);
                probe.param_slices_mut()[s][i] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - analytic[k]).abs() <= 1e-6 * fd.abs().max(1e-3),
                    "slice {s} index {i}: fd {fd} analytic {}",
                    analytic[k]
                );
                k += 1;
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = ParaNetParams::init(&small_config(), 9).unwrap();
        let b = ParaNetParams::init(&small_config(), 9).unwrap();
        let c = ParaNetParams::init(&small_config(), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
