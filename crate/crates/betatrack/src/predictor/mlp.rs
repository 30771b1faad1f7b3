//! Flat-parameter MLP with a shared extractor and independent sigmoid heads.
//!
//! Parameters live in one contiguous `Vec<f64>` so snapshots, momentum
//! buffers, L2 terms and finite-difference probes are plain vector ops.
//! All arithmetic is f64 and single-threaded; given the same seed the whole
//! lifecycle is bitwise reproducible.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Network geometry.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    /// Hidden widths of the shared feature extractor.
    pub extractor_widths: Vec<usize>,
    /// Hidden width of each output head.
    pub head_hidden: usize,
    /// Number of sigmoid outputs (one head each).
    pub outputs: usize,
    /// Dropout probability after each hidden activation (training only).
    pub dropout: f64,
    /// Negative-side slope of the leaky rectifier.
    pub leaky_slope: f64,
}

impl MlpArch {
    pub fn validate(&self) -> Result<(), String> {
        if self.input_dim == 0 || self.outputs == 0 || self.head_hidden == 0 {
            return Err("dimensions must be positive".into());
        }
        if self.extractor_widths.is_empty() || self.extractor_widths.contains(&0) {
            return Err("extractor widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
struct LayerGeom {
    w_off: usize,
    b_off: usize,
    in_dim: usize,
    out_dim: usize,
}

impl LayerGeom {
    fn w<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.out_dim, self.in_dim),
            &params[self.w_off..self.w_off + self.out_dim * self.in_dim],
        )
        .unwrap()
    }

    fn b<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.b_off..self.b_off + self.out_dim]
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpNet {
    pub arch: MlpArch,
    params: Vec<f64>,
    extractor: Vec<LayerGeom>,
    /// Per head: (hidden layer, output layer).
    heads: Vec<(LayerGeom, LayerGeom)>,
}

fn linear_forward(x: &Array2<f64>, geom: &LayerGeom, params: &[f64]) -> Array2<f64> {
    let mut out = x.dot(&geom.w(params).t());
    let b = geom.b(params);
    for mut row in out.rows_mut() {
        for (v, bv) in row.iter_mut().zip(b) {
            *v += bv;
        }
    }
    out
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    x: Array2<f64>,
    /// Per extractor layer: pre-activation and post-dropout activation.
    ext_pre: Vec<Array2<f64>>,
    ext_act: Vec<Array2<f64>>,
    /// Dropout masks (scale factors), empty when dropout is off.
    ext_mask: Vec<Option<Array2<f64>>>,
    head_pre: Vec<Array2<f64>>,
    head_act: Vec<Array2<f64>>,
    head_mask: Vec<Option<Array2<f64>>>,
    /// Sigmoid outputs, batch x outputs.
    pub output: Array2<f64>,
}

impl MlpNet {
    pub fn new(arch: MlpArch, rng: &mut ChaCha8Rng) -> Self {
        arch.validate().expect("invalid MLP architecture");
        let mut extractor = Vec::new();
        let mut heads = Vec::new();
        let mut off = 0usize;
        let push_layer = |off: &mut usize, in_dim: usize, out_dim: usize| {
            let geom = LayerGeom { w_off: *off, b_off: *off + in_dim * out_dim, in_dim, out_dim };
            *off += in_dim * out_dim + out_dim;
            geom
        };
        let mut prev = arch.input_dim;
        for &w in &arch.extractor_widths {
            extractor.push(push_layer(&mut off, prev, w));
            prev = w;
        }
        for _ in 0..arch.outputs {
            let hidden = push_layer(&mut off, prev, arch.head_hidden);
            let out = push_layer(&mut off, arch.head_hidden, 1);
            heads.push((hidden, out));
        }

        // Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
        let mut params = vec![0.0; off];
        let init = |geom: &LayerGeom, params: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (geom.in_dim as f64).sqrt();
            for k in 0..geom.out_dim * geom.in_dim {
                params[geom.w_off + k] = rng.gen_range(-bound..bound);
            }
            for k in 0..geom.out_dim {
                params[geom.b_off + k] = rng.gen_range(-bound..bound);
            }
        };
        for geom in &extractor {
            init(geom, &mut params, rng);
        }
        for (h, o) in &heads {
            init(h, &mut params, rng);
            init(o, &mut params, rng);
        }

        Self { arch, params, extractor, heads }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    fn dropout_mask(
        &self,
        shape: (usize, usize),
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Option<Array2<f64>> {
        let p = self.arch.dropout;
        let rng = rng.as_deref_mut()?;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 - p;
        let scale = 1.0 / keep;
        let mut mask = Array2::zeros(shape);
        for v in mask.iter_mut() {
            *v = if rng.gen_range(0.0..1.0) < keep { scale } else { 0.0 };
        }
        Some(mask)
    }

    /// Full forward pass. Pass a RNG to enable dropout (training mode);
    /// `None` runs deterministic inference.
    pub fn forward(&self, x: &Array2<f64>, mut dropout_rng: Option<&mut ChaCha8Rng>) -> ForwardCache {
        assert_eq!(x.ncols(), self.arch.input_dim, "input width mismatch");
        let slope = self.arch.leaky_slope;
        let batch = x.nrows();

        let mut ext_pre = Vec::new();
        let mut ext_act = Vec::new();
        let mut ext_mask = Vec::new();
        let mut cur = x.clone();
        for geom in &self.extractor {
            let pre = linear_forward(&cur, geom, &self.params);
            let mut act = pre.mapv(|v| leaky(v, slope));
            let mask = self.dropout_mask((batch, geom.out_dim), &mut dropout_rng);
            if let Some(m) = &mask {
                act *= m;
            }
            ext_pre.push(pre);
            ext_act.push(act.clone());
            ext_mask.push(mask);
            cur = act;
        }

        let mut head_pre = Vec::new();
        let mut head_act = Vec::new();
        let mut head_mask = Vec::new();
        let mut output = Array2::zeros((batch, self.arch.outputs));
        for (k, (hidden, out)) in self.heads.iter().enumerate() {
            let pre = linear_forward(&cur, hidden, &self.params);
            let mut act = pre.mapv(|v| leaky(v, slope));
            let mask = self.dropout_mask((batch, hidden.out_dim), &mut dropout_rng);
            if let Some(m) = &mask {
                act *= m;
            }
            let z = linear_forward(&act, out, &self.params);
            for (r, zv) in z.column(0).iter().enumerate() {
                output[(r, k)] = sigmoid(*zv);
            }
            head_pre.push(pre);
            head_act.push(act);
            head_mask.push(mask);
        }

        ForwardCache { x: x.clone(), ext_pre, ext_act, ext_mask, head_pre, head_act, head_mask, output }
    }

    /// Inference outputs only (dropout disabled).
    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x, None).output
    }

    /// Mean squared error over batch and outputs (data term only).
    pub fn mse(output: &Array2<f64>, targets: &Array2<f64>) -> f64 {
        let diff = output - targets;
        diff.mapv(|d| d * d).sum() / (output.nrows() * output.ncols()) as f64
    }

    /// Backpropagate the MSE data term; returns the flat parameter gradient.
    pub fn backward(&self, cache: &ForwardCache, targets: &Array2<f64>) -> Vec<f64> {
        let slope = self.arch.leaky_slope;
        let batch = cache.x.nrows();
        let scale = 2.0 / (batch * self.arch.outputs) as f64;
        let mut grad = vec![0.0; self.params.len()];

        let ext_out = cache.ext_act.last().unwrap_or(&cache.x);
        let mut d_ext_out: Array2<f64> = Array2::zeros(ext_out.raw_dim());

        for (k, (hidden, out)) in self.heads.iter().enumerate() {
            // dL/dz at the sigmoid input
            let mut dz = Array1::zeros(batch);
            for r in 0..batch {
                let y = cache.output[(r, k)];
                let d_out = scale * (y - targets[(r, k)]);
                dz[r] = d_out * y * (1.0 - y);
            }
            // output layer: z = act . w^T + b, w shape (1, head_hidden)
            let act = &cache.head_act[k];
            {
                let gw = &mut grad[out.w_off..out.w_off + out.in_dim];
                for r in 0..batch {
                    let dzr = dz[r];
                    for (c, gv) in gw.iter_mut().enumerate() {
                        *gv += dzr * act[(r, c)];
                    }
                }
                grad[out.b_off] += dz.sum();
            }
            // gradient into the head activation
            let w_out = out.w(&self.params);
            let mut d_act = Array2::zeros(act.raw_dim());
            for r in 0..batch {
                let dzr = dz[r];
                for c in 0..out.in_dim {
                    d_act[(r, c)] = dzr * w_out[(0, c)];
                }
            }
            if let Some(m) = &cache.head_mask[k] {
                d_act *= m;
            }
            let pre = &cache.head_pre[k];
            let d_pre = {
                let mut d = d_act;
                d.zip_mut_with(pre, |dv, &pv| *dv *= leaky_grad(pv, slope));
                d
            };
            // hidden layer params and input gradient
            accumulate_linear(&mut grad, hidden, ext_out, &d_pre);
            d_ext_out = d_ext_out + d_pre.dot(&hidden.w(&self.params));
        }

        // extractor, walking backwards
        let mut d_out = d_ext_out;
        for (idx, geom) in self.extractor.iter().enumerate().rev() {
            if let Some(m) = &cache.ext_mask[idx] {
                d_out *= m;
            }
            let pre = &cache.ext_pre[idx];
            d_out.zip_mut_with(pre, |dv, &pv| *dv *= leaky_grad(pv, slope));
            let input = if idx == 0 { &cache.x } else { &cache.ext_act[idx - 1] };
            accumulate_linear(&mut grad, geom, input, &d_out);
            if idx > 0 {
                d_out = d_out.dot(&geom.w(&self.params));
            }
        }

        grad
    }

    /// Signs of every hidden pre-activation, used to detect rectifier-kink
    /// crossings during finite-difference probes.
    pub fn activation_signs(&self, x: &Array2<f64>) -> Vec<bool> {
        let cache = self.forward(x, None);
        let mut signs = Vec::new();
        for pre in cache.ext_pre.iter().chain(cache.head_pre.iter()) {
            signs.extend(pre.iter().map(|&v| v > 0.0));
        }
        signs
    }
}

fn accumulate_linear(grad: &mut [f64], geom: &LayerGeom, input: &Array2<f64>, d_pre: &Array2<f64>) {
    // dW = d_pre^T . input, db = column sums of d_pre
    let dw = d_pre.t().dot(input);
    let gw = &mut grad[geom.w_off..geom.w_off + geom.out_dim * geom.in_dim];
    for (g, d) in gw.iter_mut().zip(dw.iter()) {
        *g += d;
    }
    let db = d_pre.sum_axis(Axis(0));
    let gb = &mut grad[geom.b_off..geom.b_off + geom.out_dim];
    for (g, d) in gb.iter_mut().zip(db.iter()) {
        *g += d;
    }
}
