//! From-scratch compact convolutional network for EEG classification.
//!
//! The architecture follows the DeepConvNet family: block 1 is a temporal
//! convolution applied per channel followed by a spatial convolution across
//! all channels; later blocks are temporal convolutions; every block is
//! normalization (when enabled), ELU, max-pool over time, dropout; a dense
//! softmax head closes the stack. Temporal convolutions are length
//! preserving (zero padding, left `(k-1)/2`), so the only shape constraint
//! is that the pooled length stays at least one through every block.
//!
//! Forward and backward are hand-written over flat buffers and generic over
//! the float width: training runs in `f32`, gradient checking in `f64`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::rng::Rng;

/// Index of the "target present" class in the softmax output.
pub const TARGET_CLASS: usize = 1;

const BN_EPS: f64 = 1e-5;
/// Running statistics update rate: `running = 0.9 * running + 0.1 * batch`.
const BN_MOMENTUM: f64 = 0.1;

/// Width/depth hyperparameters shared by every detector; the per-detector
/// input length is what differs between the three roles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkHyper {
    pub block_filters: Vec<usize>,
    pub temporal_kernel: usize,
    pub pool: usize,
    pub dropout_p: f64,
    pub batch_norm: bool,
}

impl Default for NetworkHyper {
    fn default() -> Self {
        NetworkHyper {
            block_filters: vec![8, 16, 32, 64],
            temporal_kernel: 10,
            pool: 3,
            dropout_p: 0.5,
            batch_norm: true,
        }
    }
}

impl NetworkHyper {
    pub fn spec(&self, n_channels: usize, input_len: usize) -> NetworkSpec {
        NetworkSpec {
            n_channels,
            input_len,
            block_filters: self.block_filters.clone(),
            temporal_kernel: self.temporal_kernel,
            pool: self.pool,
            dropout_p: self.dropout_p,
            n_classes: 2,
            batch_norm: self.batch_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_channels: usize,
    pub input_len: usize,
    pub block_filters: Vec<usize>,
    pub temporal_kernel: usize,
    pub pool: usize,
    pub dropout_p: f64,
    pub n_classes: usize,
    pub batch_norm: bool,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.block_filters.is_empty() {
            return Err(NetError::InvalidSpec("block_filters is empty".to_string()));
        }
        if self.n_classes != 2 {
            return Err(NetError::InvalidSpec(format!(
                "n_classes is fixed at 2, got {}",
                self.n_classes
            )));
        }
        if self.n_channels == 0 || self.input_len == 0 || self.pool == 0 || self.temporal_kernel == 0
        {
            return Err(NetError::InvalidSpec(
                "channels, input length, pool, and kernel must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(NetError::InvalidSpec(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        for (i, &len) in self.pooled_lens().iter().enumerate() {
            if len == 0 {
                return Err(NetError::InvalidSpec(format!(
                    "block {} pools the signal away (input_len {})",
                    i + 1,
                    self.input_len
                )));
            }
        }
        Ok(())
    }

    /// Time length after each block's pool.
    pub fn pooled_lens(&self) -> Vec<usize> {
        let mut lens = Vec::with_capacity(self.block_filters.len());
        let mut l = self.input_len;
        for _ in &self.block_filters {
            l /= self.pool;
            lens.push(l);
        }
        lens
    }

    /// Input width of the dense readout. The readout sees each feature
    /// map's maximum AND mean over the remaining time bins (a global pool
    /// over time), so a target is detected wherever it sits in the trial
    /// and its prominence over the trial's own background is one linear
    /// combination away.
    pub fn dense_in(&self) -> usize {
        2 * *self.block_filters.last().expect("non-empty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Convolution/dense weights: trained, weight-decayed.
    Weight,
    /// Bias vectors: trained, never decayed.
    Bias,
    /// Normalization scale/shift: trained, never decayed.
    Norm,
    /// Normalization running statistics: updated by forward passes only.
    RunningStat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<R> {
    pub dims: Vec<usize>,
    pub data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![R::ZERO; n],
        }
    }

    pub fn filled(dims: &[usize], value: R) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<R> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: Tensor<R>,
}

/// Ordered name -> tensor map holding every learnable tensor and the
/// normalization running statistics. Order is the definition order and is
/// stable across runs, so serialization and optimizer traversal are
/// deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters<R> {
    entries: Vec<ParamEntry<R>>,
}

impl<R> Default for NetworkParameters<R> {
    fn default() -> Self {
        NetworkParameters {
            entries: Vec::new(),
        }
    }
}

impl<R: Real> NetworkParameters<R> {
    pub fn push(&mut self, name: &str, kind: ParamKind, tensor: Tensor<R>) {
        debug_assert!(self.get(name).is_none(), "duplicate parameter {name}");
        self.entries.push(ParamEntry {
            name: name.to_string(),
            kind,
            tensor,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<R>> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<R>> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.tensor)
    }

    pub fn entries(&self) -> &[ParamEntry<R>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<R>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.tensor.data.iter().all(|v| v.is_finite()))
    }

    /// Same names/kinds/shapes, zero-filled. Gradient maps are built this
    /// way so they always mirror the parameter map exactly.
    pub fn zeros_like(&self) -> NetworkParameters<R> {
        NetworkParameters {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    kind: e.kind,
                    tensor: Tensor::zeros(&e.tensor.dims),
                })
                .collect(),
        }
    }

    pub fn convert<S: Real>(&self) -> NetworkParameters<S> {
        NetworkParameters {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    kind: e.kind,
                    tensor: Tensor {
                        dims: e.tensor.dims.clone(),
                        data: e.tensor.data.iter().map(|v| S::from_f64(v.to_f64())).collect(),
                    },
                })
                .collect(),
        }
    }
}

/// Gradients carry exactly the same keys and shapes as the parameters.
pub type Gradients<R> = NetworkParameters<R>;

#[derive(Clone, Debug, PartialEq)]
pub enum NetError {
    InvalidSpec(String),
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    NonFiniteLoss {
        batch_index: usize,
    },
    MissingParam {
        name: String,
    },
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::InvalidSpec(reason) => write!(f, "invalid network spec: {reason}"),
            NetError::ShapeMismatch {
                layer,
                expected,
                got,
            } => write!(f, "shape mismatch at {layer}: expected {expected:?}, got {got:?}"),
            NetError::NonFiniteLoss { batch_index } => {
                write!(f, "non-finite loss contribution at batch index {batch_index}")
            }
            NetError::MissingParam { name } => write!(f, "parameter {name} missing"),
        }
    }
}

impl core::error::Error for NetError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Names, kinds, and shapes the spec defines, in definition order.
pub fn expected_shapes(spec: &NetworkSpec) -> Vec<(String, ParamKind, Vec<usize>)> {
    let k = spec.temporal_kernel;
    let c = spec.n_channels;
    let f = &spec.block_filters;
    let mut out: Vec<(String, ParamKind, Vec<usize>)> = Vec::new();
    out.push(("block1.temporal.weight".into(), ParamKind::Weight, vec![f[0], k]));
    out.push(("block1.spatial.weight".into(), ParamKind::Weight, vec![f[0], f[0], c]));
    if spec.batch_norm {
        push_norm(&mut out, 1, f[0]);
    } else {
        out.push(("block1.spatial.bias".into(), ParamKind::Bias, vec![f[0]]));
    }
    for i in 1..f.len() {
        let block = i + 1;
        out.push((
            format!("block{block}.temporal.weight"),
            ParamKind::Weight,
            vec![f[i], f[i - 1], k],
        ));
        if spec.batch_norm {
            push_norm(&mut out, block, f[i]);
        } else {
            out.push((format!("block{block}.temporal.bias"), ParamKind::Bias, vec![f[i]]));
        }
    }
    out.push((
        "dense.weight".into(),
        ParamKind::Weight,
        vec![spec.n_classes, spec.dense_in()],
    ));
    out.push(("dense.bias".into(), ParamKind::Bias, vec![spec.n_classes]));
    out
}

fn push_norm(out: &mut Vec<(String, ParamKind, Vec<usize>)>, block: usize, features: usize) {
    out.push((format!("block{block}.norm.gamma"), ParamKind::Norm, vec![features]));
    out.push((format!("block{block}.norm.beta"), ParamKind::Norm, vec![features]));
    out.push((
        format!("block{block}.norm.running_mean"),
        ParamKind::RunningStat,
        vec![features],
    ));
    out.push((
        format!("block{block}.norm.running_var"),
        ParamKind::RunningStat,
        vec![features],
    ));
}

/// Seeded initialization: conv/dense weights uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases and shifts zero, scales and
/// running variances one.
pub fn init_params<R: Real>(spec: &NetworkSpec, rng: &mut Rng) -> NetworkParameters<R> {
    let k = spec.temporal_kernel;
    let c = spec.n_channels;
    let f = &spec.block_filters;
    let mut params = NetworkParameters::default();
    for (name, kind, dims) in expected_shapes(spec) {
        let tensor = match kind {
            ParamKind::Weight => {
                let fan_in = if name == "block1.temporal.weight" {
                    k
                } else if name == "block1.spatial.weight" {
                    f[0] * c
                } else if name == "dense.weight" {
                    spec.dense_in()
                } else {
                    // blockN.temporal.weight
                    dims[1] * k
                };
                let bound = 1.0 / libm::sqrt(fan_in as f64);
                let mut t = Tensor::zeros(&dims);
                for v in t.data.iter_mut() {
                    *v = R::from_f64((rng.next_f64() * 2.0 - 1.0) * bound);
                }
                t
            }
            ParamKind::Bias => Tensor::zeros(&dims),
            ParamKind::Norm => {
                if name.ends_with(".gamma") {
                    Tensor::filled(&dims, R::ONE)
                } else {
                    Tensor::zeros(&dims)
                }
            }
            ParamKind::RunningStat => {
                if name.ends_with(".running_var") {
                    Tensor::filled(&dims, R::ONE)
                } else {
                    Tensor::zeros(&dims)
                }
            }
        };
        params.push(&name, kind, tensor);
    }
    params
}

/// Checks that `params` carries exactly the tensors `spec` defines.
pub fn params_match_spec<R: Real>(
    params: &NetworkParameters<R>,
    spec: &NetworkSpec,
) -> Result<(), NetError> {
    let expected = expected_shapes(spec);
    for (name, _, dims) in &expected {
        match params.get(name) {
            None => return Err(NetError::MissingParam { name: name.clone() }),
            Some(t) if &t.dims != dims => {
                return Err(NetError::ShapeMismatch {
                    layer: name.clone(),
                    expected: dims.clone(),
                    got: t.dims.clone(),
                })
            }
            _ => {}
        }
    }
    if params.len() != expected.len() {
        return Err(NetError::InvalidSpec(format!(
            "parameter count {} does not match spec ({})",
            params.len(),
            expected.len()
        )));
    }
    Ok(())
}

// --- flat-buffer kernels ---------------------------------------------------

/// `out[t] += w * inp[t + shift]` over the valid overlap.
#[inline]
fn axpy_shifted<R: Real>(out: &mut [R], inp: &[R], w: R, shift: i64) {
    let t0 = (-shift).max(0) as usize;
    let t1 = ((inp.len() as i64 - shift).min(out.len() as i64)).max(0) as usize;
    if t1 <= t0 {
        return;
    }
    let o = &mut out[t0..t1];
    let s = (t0 as i64 + shift) as usize;
    let i = &inp[s..s + (t1 - t0)];
    for (a, b) in o.iter_mut().zip(i) {
        *a += w * *b;
    }
}

/// `sum_t a[t] * b[t + shift]` over the valid overlap, four-way unrolled.
#[inline]
fn dot_shifted<R: Real>(a: &[R], b: &[R], shift: i64) -> R {
    let t0 = (-shift).max(0) as usize;
    let t1 = ((b.len() as i64 - shift).min(a.len() as i64)).max(0) as usize;
    if t1 <= t0 {
        return R::ZERO;
    }
    let x = &a[t0..t1];
    let s = (t0 as i64 + shift) as usize;
    let y = &b[s..s + (t1 - t0)];
    let mut acc = [R::ZERO; 4];
    let chunks = x.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += x[j] * y[j];
        acc[1] += x[j + 1] * y[j + 1];
        acc[2] += x[j + 2] * y[j + 2];
        acc[3] += x[j + 3] * y[j + 3];
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..x.len() {
        total += x[i] * y[i];
    }
    total
}

#[inline]
fn pad_left(k: usize) -> i64 {
    ((k - 1) / 2) as i64
}

// --- forward ---------------------------------------------------------------

struct BlockCache<R> {
    /// Batch-norm internals, when enabled.
    xhat: Vec<R>,
    inv_std: Vec<R>,
    /// ELU outputs `[B, F, L]`.
    elu: Vec<R>,
    /// Argmax source index per pooled element.
    pool_src: Vec<u32>,
    /// Dropout multiplier per pooled element (empty when p = 0 or eval).
    drop_mask: Vec<R>,
    /// Block output `[B, F, L/pool]`.
    out: Vec<R>,
}

struct ForwardCache<R> {
    /// Standardized input `[B, C, T]`; the effective first-layer input.
    std_x: Vec<R>,
    t1: Vec<R>,
    blocks: Vec<BlockCache<R>>,
    /// Argmax bin per (example, feature) of the head's global max-pool.
    head_src: Vec<u32>,
    probs: Vec<R>,
}

struct ForwardSettings<'a> {
    mode: Mode,
    /// Update running statistics (training steps do, gradient-check
    /// evaluations do not).
    update_running: bool,
    /// Momentum for the running-statistics update; the recalibration pass
    /// overrides the default to build an arithmetic mean.
    running_momentum: f64,
    /// Dropout is applied only when an rng is supplied.
    dropout_rng: Option<&'a mut Rng>,
}

fn forward_impl<R: Real>(
    params: &mut NetworkParameters<R>,
    spec: &NetworkSpec,
    data: &[R],
    batch: usize,
    settings: ForwardSettings<'_>,
    want_cache: bool,
) -> Result<ForwardCache<R>, NetError> {
    let c = spec.n_channels;
    let t = spec.input_len;
    if data.len() != batch * c * t {
        return Err(NetError::ShapeMismatch {
            layer: "input".to_string(),
            expected: vec![batch, c, t],
            got: vec![data.len()],
        });
    }
    let k = spec.temporal_kernel;
    let pad = pad_left(k);
    let f = spec.block_filters.clone();
    let n_blocks = f.len();
    let mut dropout_rng = settings.dropout_rng;

    let std_x = data.to_vec();

    // Block 1 temporal conv: [B, C, T] -> [B, F0, C, T].
    let w_t1 = get(params, "block1.temporal.weight")?.data.clone();
    let mut t1 = vec![R::ZERO; batch * f[0] * c * t];
    for b in 0..batch {
        for fo in 0..f[0] {
            for ch in 0..c {
                let out = &mut t1[((b * f[0] + fo) * c + ch) * t..][..t];
                let inp = &std_x[(b * c + ch) * t..][..t];
                for kk in 0..k {
                    axpy_shifted(out, inp, w_t1[fo * k + kk], kk as i64 - pad);
                }
            }
        }
    }

    // Block 1 spatial conv collapses the channel axis: -> [B, F0, T].
    let w_sp = get(params, "block1.spatial.weight")?.data.clone();
    let mut conv = vec![R::ZERO; batch * f[0] * t];
    for b in 0..batch {
        for g in 0..f[0] {
            let out = &mut conv[(b * f[0] + g) * t..][..t];
            for fi in 0..f[0] {
                for ch in 0..c {
                    let w = w_sp[(g * f[0] + fi) * c + ch];
                    let inp = &t1[((b * f[0] + fi) * c + ch) * t..][..t];
                    axpy_shifted(out, inp, w, 0);
                }
            }
        }
    }

    let mut blocks: Vec<BlockCache<R>> = Vec::with_capacity(n_blocks);
    let mut cur = conv;
    let mut cur_len = t;
    for block in 0..n_blocks {
        let feat = f[block];
        if block > 0 {
            // Temporal conv: [B, F_{i-1}, L] -> [B, F_i, L].
            let w = get(params, &format!("block{}.temporal.weight", block + 1))?
                .data
                .clone();
            let fin = f[block - 1];
            let mut next = vec![R::ZERO; batch * feat * cur_len];
            for b in 0..batch {
                for fo in 0..feat {
                    let out = &mut next[(b * feat + fo) * cur_len..][..cur_len];
                    for fi in 0..fin {
                        let inp = &cur[(b * fin + fi) * cur_len..][..cur_len];
                        for kk in 0..k {
                            axpy_shifted(out, inp, w[(fo * fin + fi) * k + kk], kk as i64 - pad);
                        }
                    }
                }
            }
            cur = next;
        }

        let mut xhat = Vec::new();
        let mut inv_std = Vec::new();
        if spec.batch_norm {
            let prefix = format!("block{}.norm", block + 1);
            let n = (batch * cur_len) as f64;
            let mut means = vec![R::ZERO; feat];
            let mut vars = vec![R::ZERO; feat];
            for fo in 0..feat {
                let mut sum = R::ZERO;
                for b in 0..batch {
                    let row = &cur[(b * feat + fo) * cur_len..][..cur_len];
                    for &v in row {
                        sum += v;
                    }
                }
                let mean = sum / R::from_f64(n);
                let mut ss = R::ZERO;
                for b in 0..batch {
                    let row = &cur[(b * feat + fo) * cur_len..][..cur_len];
                    for &v in row {
                        let d = v - mean;
                        ss += d * d;
                    }
                }
                means[fo] = mean;
                vars[fo] = ss / R::from_f64(n);
            }
            let (use_mean, use_var) = match settings.mode {
                Mode::Train => (means.clone(), vars.clone()),
                Mode::Eval => (
                    get(params, &format!("{prefix}.running_mean"))?.data.clone(),
                    get(params, &format!("{prefix}.running_var"))?.data.clone(),
                ),
            };
            if settings.mode == Mode::Train && settings.update_running {
                let momentum = R::from_f64(settings.running_momentum);
                let keep = R::from_f64(1.0 - settings.running_momentum);
                let rm = &mut get_mut(params, &format!("{prefix}.running_mean"))?.data;
                for (r, m) in rm.iter_mut().zip(&means) {
                    *r = keep * *r + momentum * *m;
                }
                let rv = &mut get_mut(params, &format!("{prefix}.running_var"))?.data;
                for (r, v) in rv.iter_mut().zip(&vars) {
                    *r = keep * *r + momentum * *v;
                }
            }
            let gamma = get(params, &format!("{prefix}.gamma"))?.data.clone();
            let beta = get(params, &format!("{prefix}.beta"))?.data.clone();
            inv_std = use_var
                .iter()
                .map(|&v| R::ONE / (v + R::from_f64(BN_EPS)).sqrt())
                .collect();
            if want_cache {
                xhat = vec![R::ZERO; cur.len()];
            }
            for b in 0..batch {
                for fo in 0..feat {
                    let base = (b * feat + fo) * cur_len;
                    let row = &mut cur[base..base + cur_len];
                    let m = use_mean[fo];
                    let is = inv_std[fo];
                    let g = gamma[fo];
                    let be = beta[fo];
                    if want_cache {
                        let xh = &mut xhat[base..base + cur_len];
                        for (v, h) in row.iter_mut().zip(xh.iter_mut()) {
                            let hat = (*v - m) * is;
                            *h = hat;
                            *v = g * hat + be;
                        }
                    } else {
                        for v in row.iter_mut() {
                            *v = g * ((*v - m) * is) + be;
                        }
                    }
                }
            }
        } else {
            let bias_name = bias_name(block);
            let bias = get(params, &bias_name)?.data.clone();
            for b in 0..batch {
                for fo in 0..feat {
                    let row = &mut cur[(b * feat + fo) * cur_len..][..cur_len];
                    let bv = bias[fo];
                    for v in row.iter_mut() {
                        *v += bv;
                    }
                }
            }
        }

        // ELU in place.
        for v in cur.iter_mut() {
            if *v < R::ZERO {
                *v = v.exp() - R::ONE;
            }
        }
        let elu_cache = if want_cache { cur.clone() } else { Vec::new() };

        // Max-pool over time, first maximum wins.
        let pooled_len = cur_len / spec.pool;
        let mut pooled = vec![R::ZERO; batch * feat * pooled_len];
        let mut pool_src = if want_cache {
            vec![0u32; pooled.len()]
        } else {
            Vec::new()
        };
        for b in 0..batch {
            for fo in 0..feat {
                let row = &cur[(b * feat + fo) * cur_len..][..cur_len];
                let out_base = (b * feat + fo) * pooled_len;
                for m in 0..pooled_len {
                    let start = m * spec.pool;
                    let mut best = row[start];
                    let mut best_i = start;
                    for (j, &v) in row.iter().enumerate().take(start + spec.pool).skip(start + 1) {
                        if v > best {
                            best = v;
                            best_i = j;
                        }
                    }
                    pooled[out_base + m] = best;
                    if want_cache {
                        pool_src[out_base + m] = best_i as u32;
                    }
                }
            }
        }

        // Inverted dropout on the dense input only (after the last pool).
        // Dropping inside the stack would feed dropout-inflated variance
        // into the next block's normalization and miscalibrate its running
        // statistics for eval.
        let mut drop_mask = Vec::new();
        let last_block = block == n_blocks - 1;
        if last_block && settings.mode == Mode::Train && spec.dropout_p > 0.0 && dropout_rng.is_some() {
            let rng = dropout_rng.as_deref_mut().expect("checked above");
            let keep = 1.0 - spec.dropout_p;
            let scale = R::from_f64(1.0 / keep);
            drop_mask = (0..pooled.len())
                .map(|_| if rng.next_f64() < keep { scale } else { R::ZERO })
                .collect();
            for (v, m) in pooled.iter_mut().zip(&drop_mask) {
                *v *= *m;
            }
        }

        cur_len = pooled_len;
        blocks.push(BlockCache {
            xhat,
            inv_std,
            elu: elu_cache,
            pool_src,
            drop_mask,
            out: if want_cache { pooled.clone() } else { Vec::new() },
        });
        cur = pooled;
    }

    // Global max+mean pool over the remaining time bins, then the dense
    // head: each feature map reports its strongest activation anywhere in
    // the trial and the trial's own background level, so the readout does
    // not depend on where the response happened and can score prominence
    // rather than absolute level.
    let w_d = get(params, "dense.weight")?.data.clone();
    let b_d = get(params, "dense.bias")?.data.clone();
    let feat = *f.last().expect("non-empty");
    let bins = cur_len;
    let n_classes = spec.n_classes;
    let head_in = 2 * feat;
    let mut probs = vec![R::ZERO; batch * n_classes];
    let mut head_src = if want_cache {
        vec![0u32; batch * feat]
    } else {
        Vec::new()
    };
    for b in 0..batch {
        // [max_0..max_F, mean_0..mean_F]
        let mut pooled_feat = vec![R::ZERO; head_in];
        for fo in 0..feat {
            let row = &cur[(b * feat + fo) * bins..][..bins];
            let mut best = row[0];
            let mut best_i = 0usize;
            let mut sum = R::ZERO;
            for (i, &v) in row.iter().enumerate() {
                sum += v;
                if i > 0 && v > best {
                    best = v;
                    best_i = i;
                }
            }
            pooled_feat[fo] = best;
            pooled_feat[feat + fo] = sum / R::from_f64(bins as f64);
            if want_cache {
                head_src[b * feat + fo] = best_i as u32;
            }
        }
        let mut logits = vec![R::ZERO; n_classes];
        for (j, l) in logits.iter_mut().enumerate() {
            *l = dot_shifted(&w_d[j * head_in..(j + 1) * head_in], &pooled_feat, 0) + b_d[j];
        }
        let mut max = logits[0];
        for &l in &logits[1..] {
            max = max.maximum(l);
        }
        let mut denom = R::ZERO;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            denom += *l;
        }
        for (j, &e) in logits.iter().enumerate() {
            probs[b * n_classes + j] = e / denom;
        }
    }

    Ok(ForwardCache {
        std_x: if want_cache { std_x } else { Vec::new() },
        t1: if want_cache { t1 } else { Vec::new() },
        blocks,
        head_src,
        probs,
    })
}

fn lens_of(spec: &NetworkSpec) -> Vec<usize> {
    spec.pooled_lens()
}

fn bias_name(block: usize) -> String {
    if block == 0 {
        "block1.spatial.bias".to_string()
    } else {
        format!("block{}.temporal.bias", block + 1)
    }
}

#[inline]
fn get<'a, R>(params: &'a NetworkParameters<R>, name: &str) -> Result<&'a Tensor<R>, NetError> {
    params
        .entries
        .iter()
        .find(|e| e.name == name)
        .map(|e| &e.tensor)
        .ok_or(NetError::MissingParam {
            name: name.to_string(),
        })
}

#[inline]
fn get_mut<'a, R>(
    params: &'a mut NetworkParameters<R>,
    name: &str,
) -> Result<&'a mut Tensor<R>, NetError> {
    params
        .entries
        .iter_mut()
        .find(|e| e.name == name)
        .map(|e| &mut e.tensor)
        .ok_or(NetError::MissingParam {
            name: name.to_string(),
        })
}

/// Class probabilities `[batch x 2]` for a `[batch x channels x input_len]`
/// input. Eval mode: running statistics, no dropout, fully deterministic.
pub fn forward_eval<R: Real>(
    params: &NetworkParameters<R>,
    spec: &NetworkSpec,
    data: &[R],
    batch: usize,
) -> Result<Vec<R>, NetError> {
    let mut shim = params.clone();
    let cache = forward_impl(
        &mut shim,
        spec,
        data,
        batch,
        ForwardSettings {
            mode: Mode::Eval,
            update_running: false,
            running_momentum: BN_MOMENTUM,
            dropout_rng: None,
        },
        false,
    )?;
    Ok(cache.probs)
}

/// Train-mode forward returning probabilities only; the finite-difference
/// oracle uses this. Batch statistics normalize the activations but running
/// statistics are left untouched, so the call is pure. Dropout is not
/// applied (gradient checks run with `dropout_p = 0`).
pub fn forward_train_probs<R: Real>(
    params: &NetworkParameters<R>,
    spec: &NetworkSpec,
    data: &[R],
    batch: usize,
) -> Result<Vec<R>, NetError> {
    let mut shim = params.clone();
    let cache = forward_impl(
        &mut shim,
        spec,
        data,
        batch,
        ForwardSettings {
            mode: Mode::Train,
            update_running: false,
            running_momentum: BN_MOMENTUM,
            dropout_rng: None,
        },
        false,
    )?;
    Ok(cache.probs)
}

/// Weighted cross-entropy of probabilities against labels:
/// `mean_b ( -w[y_b] * ln p_b[y_b] )`.
pub fn weighted_cross_entropy<R: Real>(
    probs: &[R],
    labels: &[u8],
    class_weights: [R; 2],
) -> Result<R, NetError> {
    let batch = labels.len();
    let mut loss = R::ZERO;
    for (b, &y) in labels.iter().enumerate() {
        let p = probs[b * 2 + y as usize];
        let contribution = -class_weights[y as usize] * p.ln();
        if !contribution.is_finite() {
            return Err(NetError::NonFiniteLoss { batch_index: b });
        }
        loss += contribution;
    }
    Ok(loss / R::from_f64(batch as f64))
}

/// One training evaluation: forward in train mode (updating running
/// statistics), weighted cross-entropy, and the full backward pass. The
/// gradient map mirrors the parameter map key for key; running statistics
/// get zero gradients.
pub fn loss_and_grads<R: Real>(
    params: &mut NetworkParameters<R>,
    spec: &NetworkSpec,
    data: &[R],
    batch: usize,
    labels: &[u8],
    class_weights: [R; 2],
    dropout_rng: &mut Rng,
) -> Result<(R, Gradients<R>), NetError> {
    let cache = forward_impl(
        params,
        spec,
        data,
        batch,
        ForwardSettings {
            mode: Mode::Train,
            update_running: true,
            running_momentum: BN_MOMENTUM,
            dropout_rng: Some(dropout_rng),
        },
        true,
    )?;
    let loss = weighted_cross_entropy(&cache.probs, labels, class_weights)?;

    let mut grads = params.zeros_like();
    let c = spec.n_channels;
    let t = spec.input_len;
    let k = spec.temporal_kernel;
    let pad = pad_left(k);
    let f = spec.block_filters.clone();
    let n_blocks = f.len();
    let n_classes = spec.n_classes;
    let inv_batch = R::from_f64(1.0 / batch as f64);

    // d loss / d logits for softmax + weighted cross-entropy.
    let mut dlogits = vec![R::ZERO; batch * n_classes];
    for (b, &y) in labels.iter().enumerate() {
        let w = class_weights[y as usize];
        for j in 0..n_classes {
            let p = cache.probs[b * n_classes + j];
            let indicator = if j == y as usize { R::ONE } else { R::ZERO };
            dlogits[b * n_classes + j] = w * (p - indicator) * inv_batch;
        }
    }

    // Dense backward: the max part routes to each feature's argmax bin,
    // the mean part spreads uniformly over the bins.
    let feat = *f.last().expect("non-empty");
    let bins = *lens_of(spec).last().expect("non-empty");
    let head_in = 2 * feat;
    let last_out = &cache.blocks[n_blocks - 1].out;
    {
        let gw = &mut get_mut(&mut grads, "dense.weight")?.data;
        for b in 0..batch {
            for fo in 0..feat {
                let src = cache.head_src[b * feat + fo] as usize;
                let row = &last_out[(b * feat + fo) * bins..][..bins];
                let fmax = row[src];
                let mut sum = R::ZERO;
                for &v in row {
                    sum += v;
                }
                let fmean = sum / R::from_f64(bins as f64);
                for j in 0..n_classes {
                    gw[j * head_in + fo] += dlogits[b * n_classes + j] * fmax;
                    gw[j * head_in + feat + fo] += dlogits[b * n_classes + j] * fmean;
                }
            }
        }
    }
    {
        let gb = &mut get_mut(&mut grads, "dense.bias")?.data;
        for b in 0..batch {
            for j in 0..n_classes {
                gb[j] += dlogits[b * n_classes + j];
            }
        }
    }
    let w_d = get(params, "dense.weight")?.data.clone();
    let mut dcur = vec![R::ZERO; batch * feat * bins];
    let inv_bins = R::from_f64(1.0 / bins as f64);
    for b in 0..batch {
        for fo in 0..feat {
            let mut dmax = R::ZERO;
            let mut dmean = R::ZERO;
            for j in 0..n_classes {
                dmax += w_d[j * head_in + fo] * dlogits[b * n_classes + j];
                dmean += w_d[j * head_in + feat + fo] * dlogits[b * n_classes + j];
            }
            let base = (b * feat + fo) * bins;
            let src = cache.head_src[b * feat + fo] as usize;
            dcur[base + src] += dmax;
            let spread = dmean * inv_bins;
            for d in &mut dcur[base..base + bins] {
                *d += spread;
            }
        }
    }

    // Walk blocks in reverse.
    let lens = spec.pooled_lens();
    for block in (0..n_blocks).rev() {
        let feat = f[block];
        let pooled_len = lens[block];
        let pre_len = if block == 0 { t } else { lens[block - 1] };
        let bc = &cache.blocks[block];

        // Dropout backward.
        if !bc.drop_mask.is_empty() {
            for (d, m) in dcur.iter_mut().zip(&bc.drop_mask) {
                *d *= *m;
            }
        }

        // Pool backward: route into the argmax source.
        let mut dpre = vec![R::ZERO; batch * feat * pre_len];
        for b in 0..batch {
            for fo in 0..feat {
                let rowbase = (b * feat + fo) * pre_len;
                let outbase = (b * feat + fo) * pooled_len;
                for m in 0..pooled_len {
                    dpre[rowbase + bc.pool_src[outbase + m] as usize] += dcur[outbase + m];
                }
            }
        }

        // ELU backward: derivative is 1 above zero, out + 1 below.
        for (d, &o) in dpre.iter_mut().zip(&bc.elu) {
            if o < R::ZERO {
                *d *= o + R::ONE;
            }
        }

        if spec.batch_norm {
            let prefix = format!("block{}.norm", block + 1);
            let gamma = get(params, &format!("{prefix}.gamma"))?.data.clone();
            let n = R::from_f64((batch * pre_len) as f64);
            {
                let g_gamma = &mut get_mut(&mut grads, &format!("{prefix}.gamma"))?.data;
                for fo in 0..feat {
                    let mut s = R::ZERO;
                    for b in 0..batch {
                        let base = (b * feat + fo) * pre_len;
                        s += dot_shifted(&dpre[base..base + pre_len], &bc.xhat[base..base + pre_len], 0);
                    }
                    g_gamma[fo] = s;
                }
            }
            {
                let g_beta = &mut get_mut(&mut grads, &format!("{prefix}.beta"))?.data;
                for fo in 0..feat {
                    let mut s = R::ZERO;
                    for b in 0..batch {
                        let base = (b * feat + fo) * pre_len;
                        for &d in &dpre[base..base + pre_len] {
                            s += d;
                        }
                    }
                    g_beta[fo] = s;
                }
            }
            // dx = gamma * inv_std / N * (N * dy - sum(dy) - xhat * sum(dy * xhat))
            for fo in 0..feat {
                let mut sum_d = R::ZERO;
                let mut sum_dx = R::ZERO;
                for b in 0..batch {
                    let base = (b * feat + fo) * pre_len;
                    for i in 0..pre_len {
                        let d = dpre[base + i];
                        sum_d += d;
                        sum_dx += d * bc.xhat[base + i];
                    }
                }
                let scale = gamma[fo] * bc.inv_std[fo] / n;
                for b in 0..batch {
                    let base = (b * feat + fo) * pre_len;
                    for i in 0..pre_len {
                        let d = dpre[base + i];
                        dpre[base + i] = scale * (n * d - sum_d - bc.xhat[base + i] * sum_dx);
                    }
                }
            }
        } else {
            let name = bias_name(block);
            let gb = &mut get_mut(&mut grads, &name)?.data;
            for fo in 0..feat {
                let mut s = R::ZERO;
                for b in 0..batch {
                    let base = (b * feat + fo) * pre_len;
                    for &d in &dpre[base..base + pre_len] {
                        s += d;
                    }
                }
                gb[fo] += s;
            }
        }

        if block > 0 {
            let fin = f[block - 1];
            let prev_out = &cache.blocks[block - 1].out;
            let name = format!("block{}.temporal.weight", block + 1);
            let w = get(params, &name)?.data.clone();
            {
                let gw = &mut get_mut(&mut grads, &name)?.data;
                for b in 0..batch {
                    for fo in 0..feat {
                        let dout = &dpre[(b * feat + fo) * pre_len..][..pre_len];
                        for fi in 0..fin {
                            let inp = &prev_out[(b * fin + fi) * pre_len..][..pre_len];
                            for kk in 0..k {
                                gw[(fo * fin + fi) * k + kk] +=
                                    dot_shifted(dout, inp, kk as i64 - pad);
                            }
                        }
                    }
                }
            }
            let mut dprev = vec![R::ZERO; batch * fin * pre_len];
            for b in 0..batch {
                for fo in 0..feat {
                    let dout = &dpre[(b * feat + fo) * pre_len..][..pre_len];
                    for fi in 0..fin {
                        let dst = &mut dprev[(b * fin + fi) * pre_len..][..pre_len];
                        for kk in 0..k {
                            axpy_shifted(dst, dout, w[(fo * fin + fi) * k + kk], pad - kk as i64);
                        }
                    }
                }
            }
            dcur = dprev;
        } else {
            // Block 1: spatial conv backward, then temporal conv weights.
            let w_sp = get(params, "block1.spatial.weight")?.data.clone();
            {
                let g_sp = &mut get_mut(&mut grads, "block1.spatial.weight")?.data;
                for b in 0..batch {
                    for g in 0..f[0] {
                        let dout = &dpre[(b * f[0] + g) * t..][..t];
                        for fi in 0..f[0] {
                            for ch in 0..c {
                                let inp = &cache.t1[((b * f[0] + fi) * c + ch) * t..][..t];
                                g_sp[(g * f[0] + fi) * c + ch] += dot_shifted(dout, inp, 0);
                            }
                        }
                    }
                }
            }
            let mut dt1 = vec![R::ZERO; batch * f[0] * c * t];
            for b in 0..batch {
                for g in 0..f[0] {
                    let dout = &dpre[(b * f[0] + g) * t..][..t];
                    for fi in 0..f[0] {
                        for ch in 0..c {
                            let dst = &mut dt1[((b * f[0] + fi) * c + ch) * t..][..t];
                            axpy_shifted(dst, dout, w_sp[(g * f[0] + fi) * c + ch], 0);
                        }
                    }
                }
            }
            let g_t1 = &mut get_mut(&mut grads, "block1.temporal.weight")?.data;
            for b in 0..batch {
                for fo in 0..f[0] {
                    for ch in 0..c {
                        let dout = &dt1[((b * f[0] + fo) * c + ch) * t..][..t];
                        let inp = &cache.std_x[(b * c + ch) * t..][..t];
                        for kk in 0..k {
                            g_t1[fo * k + kk] += dot_shifted(dout, inp, kk as i64 - pad);
                        }
                    }
                }
            }
        }
    }

    Ok((loss, grads))
}


/// Replaces the EMA running statistics with exact training-set statistics:
/// one pass over the data in fixed batch order, folding each batch's
/// normalization statistics into a cumulative mean. Run after the last
/// optimizer step, this aligns eval-mode normalization with the data the
/// frozen weights were actually trained on; the EMA estimate is noisy after
/// the few dozen steps a small training set provides.
pub fn recalibrate_running_stats<R: Real>(
    params: &mut NetworkParameters<R>,
    spec: &NetworkSpec,
    data: &[R],
    n: usize,
    batch_size: usize,
) -> Result<(), NetError> {
    if !spec.batch_norm {
        return Ok(());
    }
    let per = spec.n_channels * spec.input_len;
    let mut seen = 0usize;
    let mut batch_index = 0u64;
    while seen < n {
        let b = batch_size.min(n - seen);
        batch_index += 1;
        forward_impl(
            params,
            spec,
            &data[seen * per..(seen + b) * per],
            b,
            ForwardSettings {
                mode: Mode::Train,
                update_running: true,
                running_momentum: 1.0 / batch_index as f64,
                dropout_rng: None,
            },
            false,
        )?;
        seen += b;
    }
    Ok(())
}
