//! Reduced dimension-adaptive CNN.
//!
//! The lead matrix enters as a single feature map on a `time x lead` grid.
//! Conv blocks slide `k x 1` kernels along time (same padding, optional
//! stride), optionally normalise each feature map per sample, apply ReLU and
//! optionally add the block input. Dimension-adaptive pooling then maps every
//! feature map to a fixed grid, so one set of dense weights serves every lead
//! subset. The head is dense ReLU layers with dropout and a 5-way softmax.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::dap::{pool_into, DapSpec, Pooling};
use crate::error::{Error, Result};
use crate::signal::{select_leads, ArmCatalog, Label, Matrix, SegmentRecord};

pub const MODEL_VERSION: u32 = 1;
const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub has_batchnorm: bool,
    #[serde(default)]
    pub residual: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedClassifierSpec {
    pub blocks: Vec<ConvBlockSpec>,
    pub dap: DapSpec,
    /// Hidden dense widths; the 5-way output layer is implicit.
    pub dense: Vec<usize>,
    pub dropout: f64,
    pub l2_conv: f64,
    pub l2_dense: f64,
}

impl Default for ReducedClassifierSpec {
    fn default() -> Self {
        let block = |kernel, cin, cout, stride, residual| ConvBlockSpec {
            kernel,
            in_channels: cin,
            out_channels: cout,
            stride,
            has_batchnorm: true,
            residual,
        };
        Self {
            blocks: vec![
                block(7, 1, 8, 4, false),
                block(7, 8, 8, 1, true),
                block(5, 8, 8, 1, true),
                block(3, 8, 8, 1, true),
            ],
            dap: DapSpec {
                target_length: 16,
                target_channels: 2,
                pooling: Pooling::Max,
            },
            dense: vec![32],
            dropout: 0.5,
            l2_conv: 0.0002,
            l2_dense: 0.00005,
        }
    }
}

impl ReducedClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        self.dap.validate()?;
        if self.blocks.is_empty() {
            return Err(Error::Param("classifier needs at least one conv block".into()));
        }
        if self.blocks[0].in_channels != 1 {
            return Err(Error::Param("first conv block must take 1 input feature map".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel == 0 || b.in_channels == 0 || b.out_channels == 0 || b.stride == 0 {
                return Err(Error::Param(format!("block {i}: sizes must be >= 1")));
            }
            if i > 0 && self.blocks[i - 1].out_channels != b.in_channels {
                return Err(Error::Param(format!(
                    "block {i}: in_channels {} does not chain from {}",
                    b.in_channels,
                    self.blocks[i - 1].out_channels
                )));
            }
            if b.residual && (b.stride != 1 || b.in_channels != b.out_channels) {
                return Err(Error::Param(format!(
                    "block {i}: residual needs stride 1 and equal channel counts"
                )));
            }
        }
        if self.dense.contains(&0) {
            return Err(Error::Param("dense widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Param(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.l2_conv < 0.0 || self.l2_dense < 0.0 {
            return Err(Error::Param("L2 factors must be >= 0".into()));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.out_channels) * self.dap.output_len()
    }

    /// Widths of every dense layer's output, hidden then the 5 classes.
    pub fn dense_outputs(&self) -> Vec<usize> {
        let mut v = self.dense.clone();
        v.push(Label::COUNT);
        v
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockOffsets {
    w: usize,
    b: usize,
    gamma: Option<usize>,
    beta: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct DenseOffsets {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<BlockOffsets>,
    dense: Vec<DenseOffsets>,
    total: usize,
}

impl Layout {
    fn new(spec: &ReducedClassifierSpec) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let blocks = spec
            .blocks
            .iter()
            .map(|b| BlockOffsets {
                w: take(b.out_channels * b.in_channels * b.kernel),
                b: take(b.out_channels),
                gamma: b.has_batchnorm.then(|| take(b.out_channels)),
                beta: b.has_batchnorm.then(|| take(b.out_channels)),
            })
            .collect();
        let mut fan_in = spec.feature_len();
        let dense = spec
            .dense_outputs()
            .into_iter()
            .map(|fan_out| {
                let d = DenseOffsets {
                    w: take(fan_out * fan_in),
                    b: take(fan_out),
                    fan_in,
                    fan_out,
                };
                fan_in = fan_out;
                d
            })
            .collect();
        Self {
            blocks,
            dense,
            total: at,
        }
    }
}

/// Feature maps on a `len x width` grid with `ch` channels, channel fastest.
#[derive(Debug, Clone)]
struct Feat {
    len: usize,
    width: usize,
    ch: usize,
    data: Vec<f64>,
}

impl Feat {
    fn zeros(len: usize, width: usize, ch: usize) -> Self {
        Self {
            len,
            width,
            ch,
            data: vec![0.0; len * width * ch],
        }
    }

    #[inline]
    fn at(&self, t: usize, w: usize, c: usize) -> usize {
        (t * self.width + w) * self.ch + c
    }
}

struct BlockCache {
    input: Feat,
    /// normalised conv output (or raw conv output without norm)
    xhat: Feat,
    sigma: Vec<f64>,
    /// pre-ReLU sum
    pre: Feat,
}

struct DenseCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
}

struct Trace {
    blocks: Vec<BlockCache>,
    last: Feat,
    dap_src: Vec<(usize, usize)>,
    dense: Vec<DenseCache>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedClassifier {
    pub spec: ReducedClassifierSpec,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: ReducedClassifier,
}

impl ReducedClassifier {
    /// Glorot-uniform weights, zero biases, unit norm scales.
    pub fn init(spec: ReducedClassifierSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (b, off) in spec.blocks.iter().zip(&layout.blocks) {
            let fan_in = (b.in_channels * b.kernel) as f64;
            let fan_out = (b.out_channels * b.kernel) as f64;
            let a = (6.0 / (fan_in + fan_out)).sqrt();
            for w in &mut params[off.w..off.b] {
                *w = rng.random_range(-a..a);
            }
            if let Some(g) = off.gamma {
                params[g..g + b.out_channels].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        for d in &layout.dense {
            let a = (6.0 / (d.fan_in + d.fan_out) as f64).sqrt();
            for w in &mut params[d.w..d.b] {
                *w = rng.random_range(-a..a);
            }
        }
        Ok(Self { spec, params })
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.spec)
    }

    fn forward_trace<R: Rng>(&self, input: &Matrix, mut dropout_rng: Option<&mut R>) -> Trace {
        let layout = self.layout();
        let p = &self.params;
        let mut x = Feat {
            len: input.rows,
            width: input.cols,
            ch: 1,
            data: input.data.clone(),
        };
        let mut blocks = Vec::with_capacity(self.spec.blocks.len());
        for (spec, off) in self.spec.blocks.iter().zip(&layout.blocks) {
            let z = conv_forward(&x, spec, &p[off.w..off.b], &p[off.b..off.b + spec.out_channels]);
            let (xhat, sigma, mut pre) = match (off.gamma, off.beta) {
                (Some(g), Some(b)) => {
                    let (xhat, sigma) = normalise(&z);
                    let mut y = xhat.clone();
                    for (i, v) in y.data.iter_mut().enumerate() {
                        let c = i % y.ch;
                        *v = p[g + c] * *v + p[b + c];
                    }
                    (xhat, sigma, y)
                }
                _ => (z.clone(), Vec::new(), z),
            };
            if spec.residual {
                for (v, r) in pre.data.iter_mut().zip(&x.data) {
                    *v += r;
                }
            }
            let out = Feat {
                data: pre.data.iter().map(|v| v.max(0.0)).collect(),
                ..pre.clone()
            };
            blocks.push(BlockCache {
                input: std::mem::replace(&mut x, out),
                xhat,
                sigma,
                pre,
            });
        }

        let dap = &self.spec.dap;
        let mut pooled = vec![0.0; x.ch * dap.output_len()];
        let mut dap_src = vec![(0, 0); pooled.len()];
        for c in 0..x.ch {
            let base = c * dap.output_len();
            pool_into(
                |t, w| x.data[x.at(t, w, c)],
                x.len,
                x.width,
                dap,
                |i, j, v, src| {
                    pooled[base + i * dap.target_channels + j] = v;
                    dap_src[base + i * dap.target_channels + j] = src;
                },
            );
        }

        let mut v = pooled;
        let mut dense = Vec::with_capacity(layout.dense.len());
        let n_dense = layout.dense.len();
        for (li, d) in layout.dense.iter().enumerate() {
            let w = &p[d.w..d.b];
            let pre: Vec<f64> = (0..d.fan_out)
                .map(|o| {
                    let row = &w[o * d.fan_in..(o + 1) * d.fan_in];
                    row.iter().zip(&v).fold(p[d.b + o], |a, (wi, xi)| a + wi * xi)
                })
                .collect();
            let hidden = li + 1 < n_dense;
            let (out, mask) = if hidden {
                let mut a: Vec<f64> = pre.iter().map(|h| h.max(0.0)).collect();
                let mask = match dropout_rng.as_deref_mut() {
                    Some(rng) if self.spec.dropout > 0.0 => {
                        let keep = 1.0 - self.spec.dropout;
                        let m: Vec<f64> = (0..a.len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        a.iter_mut().zip(&m).for_each(|(ai, mi)| *ai *= mi);
                        Some(m)
                    }
                    _ => None,
                };
                (a, mask)
            } else {
                (pre.clone(), None)
            };
            dense.push(DenseCache {
                input: std::mem::replace(&mut v, out),
                pre,
                mask,
            });
        }
        let probs = softmax(&v);
        Trace {
            blocks,
            last: x,
            dap_src,
            dense,
            probs,
        }
    }

    /// Class probabilities (inference: no dropout).
    pub fn predict_proba(&self, input: &Matrix) -> Vec<f64> {
        self.forward_trace::<ChaCha8Rng>(input, None).probs
    }

    pub fn predict(&self, input: &Matrix) -> Label {
        let probs = self.predict_proba(input);
        let mut best = 0;
        for (k, &v) in probs.iter().enumerate() {
            if v > probs[best] {
                best = k;
            }
        }
        Label::from_index(best).expect("5 outputs")
    }

    /// Adds `dLoss/dparams` for one example into `grad`; returns the cross-entropy.
    pub(crate) fn accumulate_example<R: Rng>(
        &self,
        input: &Matrix,
        label: Label,
        dropout_rng: Option<&mut R>,
        grad: &mut [f64],
    ) -> f64 {
        let layout = self.layout();
        let p = &self.params;
        let tr = self.forward_trace(input, dropout_rng);
        let y = label.index();
        let loss = -tr.probs[y].max(1e-300).ln();

        // dense head, output first
        let mut dv: Vec<f64> = tr.probs.clone();
        dv[y] -= 1.0;
        for (li, (d, cache)) in layout.dense.iter().zip(&tr.dense).enumerate().rev() {
            let hidden = li + 1 < layout.dense.len();
            let dpre: Vec<f64> = if hidden {
                dv.iter()
                    .zip(&cache.pre)
                    .enumerate()
                    .map(|(o, (g, h))| {
                        let m = cache.mask.as_ref().map_or(1.0, |m| m[o]);
                        if *h > 0.0 {
                            g * m
                        } else {
                            0.0
                        }
                    })
                    .collect()
            } else {
                dv
            };
            let mut din = vec![0.0; d.fan_in];
            for (o, &g) in dpre.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad[d.b + o] += g;
                let row = d.w + o * d.fan_in;
                for i in 0..d.fan_in {
                    grad[row + i] += g * cache.input[i];
                    din[i] += g * p[row + i];
                }
            }
            dv = din;
        }

        // DAP
        let last = &tr.last;
        let dap = &self.spec.dap;
        let mut dx = Feat::zeros(last.len, last.width, last.ch);
        for c in 0..last.ch {
            let base = c * dap.output_len();
            for i in 0..dap.target_length {
                for j in 0..dap.target_channels {
                    let k = base + i * dap.target_channels + j;
                    let g = dv[k];
                    match dap.pooling {
                        Pooling::Max => {
                            let (t, w) = tr.dap_src[k];
                            let at = dx.at(t, w, c);
                            dx.data[at] += g;
                        }
                        Pooling::Mean => {
                            let (r0, r1) = super::dap::bin(i, last.len, dap.target_length);
                            let (c0, c1) = super::dap::bin(j, last.width, dap.target_channels);
                            let share = g / ((r1 - r0) * (c1 - c0)) as f64;
                            for t in r0..r1 {
                                for w in c0..c1 {
                                    let at = dx.at(t, w, c);
                                    dx.data[at] += share;
                                }
                            }
                        }
                    }
                }
            }
        }

        // conv blocks
        for ((spec, off), cache) in self.spec.blocks.iter().zip(&layout.blocks).zip(&tr.blocks).rev() {
            let mut dpre = dx;
            for (g, h) in dpre.data.iter_mut().zip(&cache.pre.data) {
                if *h <= 0.0 {
                    *g = 0.0;
                }
            }
            let dz = match (off.gamma, off.beta) {
                (Some(go), Some(bo)) => {
                    let ch = dpre.ch;
                    let n = (dpre.len * dpre.width) as f64;
                    let mut dxhat = dpre.clone();
                    let mut sum_d = vec![0.0; ch];
                    let mut sum_dx = vec![0.0; ch];
                    for (i, g) in dpre.data.iter().enumerate() {
                        let c = i % ch;
                        let xh = cache.xhat.data[i];
                        grad[go + c] += g * xh;
                        grad[bo + c] += g;
                        let d = g * p[go + c];
                        dxhat.data[i] = d;
                        sum_d[c] += d;
                        sum_dx[c] += d * xh;
                    }
                    for (i, v) in dxhat.data.iter_mut().enumerate() {
                        let c = i % ch;
                        *v = (*v - sum_d[c] / n - cache.xhat.data[i] * sum_dx[c] / n) / cache.sigma[c];
                    }
                    dxhat
                }
                _ => dpre.clone(),
            };
            let mut dinput = conv_backward(
                &cache.input,
                &dz,
                spec,
                &p[off.w..off.b],
                grad,
                off.w,
                off.b,
            );
            if spec.residual {
                for (a, b) in dinput.data.iter_mut().zip(&dpre.data) {
                    *a += b;
                }
            }
            dx = dinput;
        }
        loss
    }

    /// L2 penalty value and its gradient added into `grad`.
    pub(crate) fn add_l2(&self, grad: &mut [f64]) -> f64 {
        let layout = self.layout();
        let mut penalty = 0.0;
        let mut apply = |lo: usize, hi: usize, l2: f64| {
            for (g, &w) in grad[lo..hi].iter_mut().zip(&self.params[lo..hi]) {
                penalty += l2 * w * w;
                *g += 2.0 * l2 * w;
            }
        };
        for off in &layout.blocks {
            apply(off.w, off.b, self.spec.l2_conv);
        }
        for d in &layout.dense {
            apply(d.w, d.b, self.spec.l2_dense);
        }
        penalty
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&ModelFile {
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if f.version != MODEL_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("unsupported model version {}", f.version),
            });
        }
        f.model.spec.validate()?;
        if f.model.params.len() != Layout::new(&f.model.spec).total {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: "parameter count does not match spec".into(),
            });
        }
        Ok(f.model)
    }
}

fn conv_forward(x: &Feat, spec: &ConvBlockSpec, w: &[f64], bias: &[f64]) -> Feat {
    let (k, cin, cout, s) = (spec.kernel, spec.in_channels, spec.out_channels, spec.stride);
    let pad = k / 2;
    let out_len = x.len.div_ceil(s);
    let mut z = Feat::zeros(out_len, x.width, cout);
    for t in 0..out_len {
        let base = (t * s) as isize - pad as isize;
        for wi in 0..x.width {
            for o in 0..cout {
                let mut acc = bias[o];
                for kk in 0..k {
                    let src = base + kk as isize;
                    if src < 0 || src as usize >= x.len {
                        continue;
                    }
                    let xi = x.at(src as usize, wi, 0);
                    for c in 0..cin {
                        acc += w[(o * cin + c) * k + kk] * x.data[xi + c];
                    }
                }
                let zi = z.at(t, wi, o);
                z.data[zi] = acc;
            }
        }
    }
    z
}

fn conv_backward(
    x: &Feat,
    dz: &Feat,
    spec: &ConvBlockSpec,
    w: &[f64],
    grad: &mut [f64],
    w_off: usize,
    b_off: usize,
) -> Feat {
    let (k, cin, cout, s) = (spec.kernel, spec.in_channels, spec.out_channels, spec.stride);
    let pad = k / 2;
    let mut dx = Feat::zeros(x.len, x.width, cin);
    for t in 0..dz.len {
        let base = (t * s) as isize - pad as isize;
        for wi in 0..x.width {
            for o in 0..cout {
                let g = dz.data[dz.at(t, wi, o)];
                if g == 0.0 {
                    continue;
                }
                grad[b_off + o] += g;
                for kk in 0..k {
                    let src = base + kk as isize;
                    if src < 0 || src as usize >= x.len {
                        continue;
                    }
                    let xi = x.at(src as usize, wi, 0);
                    for c in 0..cin {
                        let wk = (o * cin + c) * k + kk;
                        grad[w_off + wk] += g * x.data[xi + c];
                        dx.data[xi + c] += g * w[wk];
                    }
                }
            }
        }
    }
    dx
}

/// Per-sample, per-channel standardisation over the whole `len x width` grid.
fn normalise(z: &Feat) -> (Feat, Vec<f64>) {
    let ch = z.ch;
    let n = (z.len * z.width) as f64;
    let mut mu = vec![0.0; ch];
    for (i, v) in z.data.iter().enumerate() {
        mu[i % ch] += v;
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; ch];
    for (i, v) in z.data.iter().enumerate() {
        let d = v - mu[i % ch];
        var[i % ch] += d * d;
    }
    let sigma: Vec<f64> = var.iter().map(|v| (v / n + NORM_EPS).sqrt()).collect();
    let mut out = z.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        let c = i % ch;
        *v = (*v - mu[c]) / sigma[c];
    }
    (out, sigma)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Random lead subsets whose gradients are accumulated per update.
    pub views_per_step: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 80,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            views_per_step: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean cross-entropy (plus L2) per update step.
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.step_losses.last().copied()
    }
}

/// One example as seen through one lead subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct View {
    pub example: usize,
    pub arm: usize,
}

/// Mean gradient over `views` (no L2); returns `(summed_grad / n, mean_loss)`.
pub fn views_gradient<R: Rng>(
    model: &ReducedClassifier,
    data: &[SegmentRecord],
    catalog: &ArmCatalog,
    views: &[View],
    mut dropout_rng: Option<&mut R>,
) -> Result<(Vec<f64>, f64)> {
    let mut grad = vec![0.0; model.params.len()];
    let mut loss = 0.0;
    for v in views {
        let seg = &data[v.example];
        let input = select_leads(seg, v.arm, catalog)?;
        loss += model.accumulate_example(&input, seg.label, dropout_rng.as_deref_mut(), &mut grad);
    }
    let n = views.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((grad, loss / n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.epsilon);
        }
    }
}

/// Dimension-randomised training with gradients accumulated over lead-subset views.
///
/// Every mini-batch is replayed through `views_per_step` randomly drawn arms;
/// the per-view gradients are summed and one Adam step is taken.
pub fn train_reduced_classifier(
    train: &[SegmentRecord],
    spec: &ReducedClassifierSpec,
    catalog: &ArmCatalog,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ReducedClassifier, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Param("training set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.views_per_step == 0 {
        return Err(Error::Param("batch size and views per step must be >= 1".into()));
    }
    let mut model = ReducedClassifier::init(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1a5);
    let mut adam = Adam::new(model.params.len(), cfg);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut views = Vec::with_capacity(batch.len() * cfg.views_per_step);
            for _ in 0..cfg.views_per_step {
                let arm = rng.random_range(0..catalog.len());
                views.extend(batch.iter().map(|&example| View { example, arm }));
            }
            let (mut grad, loss) = views_gradient(&model, train, catalog, &views, Some(&mut rng))?;
            let penalty = model.add_l2(&mut grad);
            let total = loss + penalty;
            let step = report.step_losses.len();
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { step, loss: total });
            }
            adam.step(&mut model.params, &grad, cfg.learning_rate);
            report.step_losses.push(total);
        }
    }
    Ok((model, report))
}

/// Predicted class of `segment` seen through `arm`.
pub fn classify(
    model: &ReducedClassifier,
    segment: &SegmentRecord,
    arm: usize,
    catalog: &ArmCatalog,
) -> Result<Label> {
    Ok(model.predict(&select_leads(segment, arm, catalog)?))
}
