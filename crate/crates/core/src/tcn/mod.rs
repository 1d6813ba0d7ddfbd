//! Temporal convolutional network classifier.
//!
//! A stack of temporal blocks, one per entry of `channel_sizes`. Each block
//! is two causal convolutions (dilation `2^block`) with ReLU and inverted
//! dropout, plus a residual connection that is the identity when channel
//! counts match and a learned 1x1 projection otherwise; the sum goes through
//! a final ReLU. The `layers` structure replaces each block by a single
//! convolution without residual. Features at the last time step (or the
//! time average) feed a linear head and a softmax.
//!
//! Backpropagation is written out by hand and checked against central
//! finite differences in the test suite.

mod adam;
pub mod layers;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

pub use adam::{AdamConfig, AdamState};
pub use layers::{Conv1d, Linear};

use crate::config::KvConfig;
use crate::rng;
use crate::types::{ClassId, Dataset};
use crate::{Error, Result};
use layers::relu_in_place;

/// How a feature vector is presented to the first convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputLayout {
    /// Each sample is an input channel of a length-1 sequence.
    Channels,
    /// One input channel, one time step per sample.
    Sequence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Features at the final time step.
    Last,
    /// Global average over time.
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    /// Two convolutions and a residual connection per channel-size entry.
    Blocks,
    /// A single convolution per channel-size entry, no residual.
    Layers,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::param(stringify!($ty), format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

keyword_enum!(InputLayout { Channels => "channels", Sequence => "sequence" });
keyword_enum!(Readout { Last => "last", Mean => "mean" });
keyword_enum!(Structure { Blocks => "blocks", Layers => "layers" });

#[derive(Clone, Debug, PartialEq)]
pub struct TcnParams {
    pub kernel_size: usize,
    pub dropout: f64,
    pub channel_sizes: Vec<usize>,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub layout: InputLayout,
    pub readout: Readout,
    pub structure: Structure,
    /// Multiplier applied to raw amplitudes (normally `1 / a_sat`).
    pub input_scale: f64,
}

impl Default for TcnParams {
    fn default() -> Self {
        TcnParams {
            kernel_size: 1,
            dropout: 0.05,
            channel_sizes: vec![32, 32, 32, 64, 64, 64, 128, 128],
            batch_size: 32,
            iterations: 4000,
            learning_rate: 2e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            layout: InputLayout::Channels,
            readout: Readout::Last,
            structure: Structure::Blocks,
            input_scale: 1.0,
        }
    }
}

impl TcnParams {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = TcnParams::default();
        let a_sat: f64 = cfg.get_or("sensor.a_sat", 1.0)?;
        let p = TcnParams {
            kernel_size: cfg.get_or("tcn.kernel_size", d.kernel_size)?,
            dropout: cfg.get_or("tcn.dropout", d.dropout)?,
            channel_sizes: cfg.list("tcn.channel_sizes")?.unwrap_or(d.channel_sizes),
            batch_size: cfg.get_or("tcn.batch_size", d.batch_size)?,
            iterations: cfg.get_or("tcn.iterations", d.iterations)?,
            learning_rate: cfg.get_or("tcn.learning_rate", d.learning_rate)?,
            adam_beta1: cfg.get_or("tcn.adam_beta1", d.adam_beta1)?,
            adam_beta2: cfg.get_or("tcn.adam_beta2", d.adam_beta2)?,
            adam_eps: cfg.get_or("tcn.adam_eps", d.adam_eps)?,
            seed: cfg.get_or("tcn.seed", d.seed)?,
            layout: cfg.get_or("tcn.layout", d.layout)?,
            readout: cfg.get_or("tcn.readout", d.readout)?,
            structure: cfg.get_or("tcn.structure", d.structure)?,
            input_scale: 1.0 / a_sat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return Err(Error::param("kernel_size", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout", "must lie in [0, 1)"));
        }
        if self.channel_sizes.is_empty() || self.channel_sizes.contains(&0) {
            return Err(Error::param("channel_sizes", "must be non-empty and positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::param("adam_beta", "must lie in [0, 1)"));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::param("adam_eps", "must be > 0"));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return Err(Error::param("input_scale", "must be > 0"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalBlock {
    pub conv1: Conv1d,
    /// Absent in the `layers` structure.
    pub conv2: Option<Conv1d>,
    /// Present only when the residual path must change channel count.
    pub projection: Option<Conv1d>,
}

impl TemporalBlock {
    pub fn has_residual(&self) -> bool {
        self.conv2.is_some()
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.as_ref().unwrap_or(&self.conv1).out_channels
    }

    fn zeros_like(&self) -> Self {
        let z = |c: &Conv1d| Conv1d::zeros(c.in_channels, c.out_channels, c.kernel_size, c.dilation);
        TemporalBlock {
            conv1: z(&self.conv1),
            conv2: self.conv2.as_ref().map(z),
            projection: self.projection.as_ref().map(z),
        }
    }

    fn convs(&self) -> impl Iterator<Item = &Conv1d> {
        core::iter::once(&self.conv1)
            .chain(self.conv2.as_ref())
            .chain(self.projection.as_ref())
    }

    fn convs_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        core::iter::once(&mut self.conv1)
            .chain(self.conv2.as_mut())
            .chain(self.projection.as_mut())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcnModel {
    pub layout: InputLayout,
    pub readout: Readout,
    /// Width of the raw feature vector (256 for waveforms).
    pub input_len: usize,
    pub input_scale: f64,
    pub dropout: f64,
    pub blocks: Vec<TemporalBlock>,
    pub head: Linear,
}

/// Parameter gradients, shaped exactly like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub TcnModel);

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.0.tensors()
    }
}

impl TcnModel {
    pub fn n_classes(&self) -> usize {
        self.head.out_features
    }

    /// Every parameter tensor in a fixed order: per block conv1 weight,
    /// bias, conv2 weight, bias, projection weight, bias; then head.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for b in &self.blocks {
            for c in b.convs() {
                out.push(&c.weight);
                out.push(&c.bias);
            }
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.blocks {
            for c in b.convs_mut() {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        TcnModel {
            blocks: self.blocks.iter().map(TemporalBlock::zeros_like).collect(),
            head: Linear::zeros(self.head.in_features, self.head.out_features),
            ..self.clone()
        }
    }

    /// `(channels, length)` of the input tensor.
    pub fn input_shape(&self) -> (usize, usize) {
        match self.layout {
            InputLayout::Channels => (self.input_len, 1),
            InputLayout::Sequence => (1, self.input_len),
        }
    }

    fn input_tensor(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len, "input width");
        // Time-major layout makes both arrangements the same flat vector.
        x.iter().map(|v| v * self.input_scale).collect()
    }
}

/// Builds a model with fan-in scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_tcn(params: &TcnParams, input_len: usize, n_classes: usize, seed: u64) -> Result<TcnModel> {
    params.validate()?;
    if n_classes < 2 {
        return Err(Error::param("n_classes", "must be >= 2"));
    }
    if input_len == 0 {
        return Err(Error::param("input_len", "must be >= 1"));
    }
    let in0 = match params.layout {
        InputLayout::Channels => input_len,
        InputLayout::Sequence => 1,
    };
    let k = params.kernel_size;
    let mut blocks = Vec::with_capacity(params.channel_sizes.len());
    let mut c_in = in0;
    for (i, &c_out) in params.channel_sizes.iter().enumerate() {
        let dilation = 1usize << i.min(20);
        let block = match params.structure {
            Structure::Blocks => TemporalBlock {
                conv1: Conv1d::zeros(c_in, c_out, k, dilation),
                conv2: Some(Conv1d::zeros(c_out, c_out, k, dilation)),
                projection: (c_in != c_out).then(|| Conv1d::zeros(c_in, c_out, 1, 1)),
            },
            Structure::Layers => TemporalBlock {
                conv1: Conv1d::zeros(c_in, c_out, k, dilation),
                conv2: None,
                projection: None,
            },
        };
        blocks.push(block);
        c_in = c_out;
    }
    let mut model = TcnModel {
        layout: params.layout,
        readout: params.readout,
        input_len,
        input_scale: params.input_scale,
        dropout: params.dropout,
        blocks,
        head: Linear::zeros(c_in, n_classes),
    };

    let fan_ins: Vec<usize> = model
        .blocks
        .iter()
        .flat_map(|b| b.convs().map(Conv1d::fan_in).collect::<Vec<_>>())
        .chain(core::iter::once(model.head.in_features))
        .collect();
    let mut t = 0usize;
    for (fan_in, chunk) in fan_ins.iter().zip(model.tensors_mut().chunks_mut(2)) {
        let bound = 1.0 / libm::sqrt(*fan_in as f64);
        for tensor in chunk.iter_mut() {
            let mut r = rng::stream(seed, &[t as u64]);
            for v in tensor.iter_mut() {
                *v = r.random_range(-bound..bound);
            }
            t += 1;
        }
    }
    Ok(model)
}

/// Inverted-dropout mask for one activation tensor.
fn dropout_mask(p: f64, len: usize, seed: u64, keys: &[u64]) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    let mut r = rng::stream(seed, keys);
    (0..len)
        .map(|_| if r.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

struct BlockCache {
    input: Vec<f64>,
    pre1: Vec<f64>,
    mask1: Option<Vec<f64>>,
    hidden: Vec<f64>,
    pre2: Vec<f64>,
    mask2: Option<Vec<f64>>,
    sum: Vec<f64>,
}

struct SampleCache {
    blocks: Vec<BlockCache>,
    features: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (x, k) in v.iter_mut().zip(m) {
            *x *= k;
        }
    }
}

/// `-log softmax(logits)[k]`, finite even when the probability underflows.
fn neg_log_softmax(logits: &[f64], k: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    max + libm::log(sum) - logits[k]
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

impl TcnModel {
    /// Forward pass for one sample. `dropout` carries `(seed, sample index)`
    /// in train mode.
    fn forward_sample(&self, x: &[f64], dropout: Option<(u64, u64)>) -> SampleCache {
        let (_, len) = self.input_shape();
        let mut act = self.input_tensor(x);
        let mut caches = Vec::with_capacity(self.blocks.len());
        let drop = |n: usize, block: usize, which: u64| {
            dropout
                .filter(|_| self.dropout > 0.0)
                .map(|(seed, sample)| dropout_mask(self.dropout, n, seed, &[sample, block as u64, which]))
        };
        for (bi, block) in self.blocks.iter().enumerate() {
            let pre1 = block.conv1.forward(&act, len);
            let mut h = pre1.clone();
            relu_in_place(&mut h);
            let mask1 = drop(h.len(), bi, 0);
            apply_mask(&mut h, &mask1);
            let cache = match &block.conv2 {
                Some(conv2) => {
                    let pre2 = conv2.forward(&h, len);
                    let mut h2 = pre2.clone();
                    relu_in_place(&mut h2);
                    let mask2 = drop(h2.len(), bi, 1);
                    apply_mask(&mut h2, &mask2);
                    let residual = match &block.projection {
                        Some(p) => p.forward(&act, len),
                        None => act.clone(),
                    };
                    let sum: Vec<f64> = h2.iter().zip(&residual).map(|(a, b)| a + b).collect();
                    let mut out = sum.clone();
                    relu_in_place(&mut out);
                    let input = core::mem::replace(&mut act, out);
                    BlockCache { input, pre1, mask1, hidden: h, pre2, mask2, sum }
                }
                None => {
                    let input = core::mem::replace(&mut act, h);
                    BlockCache {
                        input,
                        pre1,
                        mask1,
                        hidden: Vec::new(),
                        pre2: Vec::new(),
                        mask2: None,
                        sum: Vec::new(),
                    }
                }
            };
            caches.push(cache);
        }
        let c = self.head.in_features;
        let features = match self.readout {
            Readout::Last => act[(len - 1) * c..len * c].to_vec(),
            Readout::Mean => {
                let mut f = vec![0.0; c];
                for t in 0..len {
                    for (fi, v) in f.iter_mut().zip(&act[t * c..(t + 1) * c]) {
                        *fi += v;
                    }
                }
                f.iter_mut().for_each(|v| *v /= len as f64);
                f
            }
        };
        let logits = self.head.forward(&features);
        let probs = softmax(&logits);
        SampleCache {
            blocks: caches,
            features,
            logits,
            probs,
        }
    }

    /// Backpropagates `g_logits` for one sample into `grads`.
    fn backward_sample(&self, cache: &SampleCache, g_logits: &[f64], grads: &mut TcnModel) {
        let (_, len) = self.input_shape();
        let c = self.head.in_features;
        let g_feat = self.head.backward(&cache.features, g_logits, &mut grads.head);
        let mut g = vec![0.0; len * c];
        match self.readout {
            Readout::Last => g[(len - 1) * c..].copy_from_slice(&g_feat),
            Readout::Mean => {
                for t in 0..len {
                    for (gi, gf) in g[t * c..(t + 1) * c].iter_mut().zip(&g_feat) {
                        *gi = gf / len as f64;
                    }
                }
            }
        }
        for (bi, block) in self.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[bi];
            let gb = &mut grads.blocks[bi];
            g = match &block.conv2 {
                Some(conv2) => {
                    // out = relu(sum)
                    for (gv, s) in g.iter_mut().zip(&bc.sum) {
                        if *s <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    let g_sum = g;
                    let mut g_h2 = g_sum.clone();
                    apply_mask(&mut g_h2, &bc.mask2);
                    for (gv, p) in g_h2.iter_mut().zip(&bc.pre2) {
                        if *p <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    let mut g_h1 = conv2.backward(&bc.hidden, &g_h2, len, gb.conv2.as_mut().expect("grad shape"));
                    apply_mask(&mut g_h1, &bc.mask1);
                    for (gv, p) in g_h1.iter_mut().zip(&bc.pre1) {
                        if *p <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    let mut g_in = block.conv1.backward(&bc.input, &g_h1, len, &mut gb.conv1);
                    match &block.projection {
                        Some(p) => {
                            let g_res = p.backward(&bc.input, &g_sum, len, gb.projection.as_mut().expect("grad shape"));
                            for (a, b) in g_in.iter_mut().zip(&g_res) {
                                *a += b;
                            }
                        }
                        None => {
                            for (a, b) in g_in.iter_mut().zip(&g_sum) {
                                *a += b;
                            }
                        }
                    }
                    g_in
                }
                None => {
                    apply_mask(&mut g, &bc.mask1);
                    for (gv, p) in g.iter_mut().zip(&bc.pre1) {
                        if *p <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    block.conv1.backward(&bc.input, &g, len, &mut gb.conv1)
                }
            };
        }
    }
}

/// Class probabilities for each row. Dropout applies only when
/// `train_mode` is set; eval mode ignores `dropout_seed`.
pub fn forward<R: AsRef<[f64]>>(model: &TcnModel, batch: &[R], train_mode: bool, dropout_seed: u64) -> Vec<Vec<f64>> {
    batch
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = train_mode.then_some((dropout_seed, i as u64));
            model.forward_sample(x.as_ref(), d).probs
        })
        .collect()
}

/// Mean cross-entropy over the batch and its gradient. `dropout_seed`
/// selects train mode; `None` evaluates without dropout.
pub fn loss_and_grads<R: AsRef<[f64]>>(
    model: &TcnModel,
    batch: &[R],
    labels: &[ClassId],
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: batch.len(),
            right: labels.len(),
        });
    }
    if let Some((i, l)) = labels
        .iter()
        .enumerate()
        .find(|(_, l)| l.index() >= model.n_classes())
    {
        return Err(Error::LabelOutOfRange {
            sample: i,
            label: l.0,
            classes: model.n_classes(),
        });
    }
    let mut grads = model.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (i, (x, y)) in batch.iter().zip(labels).enumerate() {
        let cache = model.forward_sample(x.as_ref(), dropout_seed.map(|s| (s, i as u64)));
        loss += neg_log_softmax(&cache.logits, y.index());
        let g_logits: Vec<f64> = cache
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| scale * (p - if k == y.index() { 1.0 } else { 0.0 }))
            .collect();
        model.backward_sample(&cache, &g_logits, &mut grads);
    }
    Ok((loss * scale, Gradients(grads)))
}

/// Argmax of eval-mode probabilities, ties to the lowest class id.
pub fn predict_tcn(model: &TcnModel, x: &[f64]) -> ClassId {
    argmax(&model.forward_sample(x, None).probs)
}

pub fn predict_all<R: AsRef<[f64]>>(model: &TcnModel, rows: &[R]) -> Vec<ClassId> {
    rows.iter().map(|r| predict_tcn(model, r.as_ref())).collect()
}

fn argmax(p: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    ClassId(best as u16)
}

/// Eval-mode mean cross-entropy.
pub fn mean_loss<R: AsRef<[f64]>>(model: &TcnModel, rows: &[R], labels: &[ClassId]) -> Result<f64> {
    Ok(loss_and_grads(model, rows, labels, None)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcnTraining {
    pub model: TcnModel,
    /// Mini-batch loss at each iteration, in order.
    pub losses: Vec<f64>,
}

pub fn train_tcn(train: &Dataset, params: &TcnParams) -> Result<TcnTraining> {
    train_on_rows(&train.rows(), &train.labels(), train.n_classes(), params)
}

/// Adam on shuffled mini-batches; the order is reshuffled every epoch and
/// the final partial batch of an epoch is kept.
pub fn train_on_rows<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[ClassId],
    n_classes: usize,
    params: &TcnParams,
) -> Result<TcnTraining> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(Error::SingleClass);
    }
    let input_len = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != input_len) {
        return Err(Error::param("rows", "ragged feature vectors"));
    }
    let mut model = init_tcn(params, input_len, n_classes, rng::derive_seed(params.seed, &[0]))?;
    let mut adam = AdamState::for_shapes(model.tensors());
    let adam_cfg = params.adam();
    let mut shuffle_rng = rng::stream(params.seed, &[1]);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(params.iterations);
    let mut batch: Vec<&[f64]> = Vec::with_capacity(params.batch_size);
    let mut batch_labels: Vec<ClassId> = Vec::with_capacity(params.batch_size);

    for it in 0..params.iterations {
        if cursor >= order.len() {
            order.shuffle(&mut shuffle_rng);
            cursor = 0;
        }
        let end = (cursor + params.batch_size).min(order.len());
        batch.clear();
        batch_labels.clear();
        for &i in &order[cursor..end] {
            batch.push(rows[i].as_ref());
            batch_labels.push(labels[i]);
        }
        cursor = end;
        let dropout_seed = rng::derive_seed(params.seed, &[2, it as u64]);
        let (loss, grads) = loss_and_grads(&model, &batch, &batch_labels, Some(dropout_seed))?;
        if !loss.is_finite() {
            return Err(Error::param("learning_rate", format!("loss diverged at iteration {it}")));
        }
        losses.push(loss);
        adam.update(model.tensors_mut(), grads.tensors(), &adam_cfg);
    }
    Ok(TcnTraining { model, losses })
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` over
    /// entries whose absolute difference exceeds `abs_floor`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor, index)` of the worst relative error.
    pub worst: (usize, usize),
}

/// Checks every parameter of `model` against central finite differences of
/// the batch loss with step `eps`. Differences below `abs_floor` count as
/// exact agreement.
pub fn gradient_check<R: AsRef<[f64]>>(
    model: &TcnModel,
    batch: &[R],
    labels: &[ClassId],
    dropout_seed: Option<u64>,
    eps: f64,
    abs_floor: f64,
) -> Result<GradientCheck> {
    let (_, grads) = loss_and_grads(model, batch, labels, dropout_seed)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = model.clone();
    let mut out = GradientCheck {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
    };
    for (t, g) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + eps;
            let up = loss_and_grads(&probe, batch, labels, dropout_seed)?.0;
            probe.tensors_mut()[t][i] = orig - eps;
            let down = loss_and_grads(&probe, batch, labels, dropout_seed)?.0;
            probe.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let diff = (a - numeric).abs();
            out.checked += 1;
            out.max_abs_error = out.max_abs_error.max(diff);
            if diff > abs_floor {
                let rel = diff / a.abs().max(numeric.abs());
                if rel > out.max_rel_error {
                    out.max_rel_error = rel;
                    out.worst = (t, i);
                }
            }
        }
    }
    Ok(out)
}

/// Human-readable architecture summary.
pub fn describe(model: &TcnModel) -> String {
    let mut s = format!(
        "layout={} readout={} input_len={} blocks={}",
        model.layout.as_str(),
        model.readout.as_str(),
        model.input_len,
        model.blocks.len()
    );
    for b in &model.blocks {
        s.push_str(&format!(
            " [{}->{}{}]",
            b.in_channels(),
            b.out_channels(),
            match (&b.conv2, &b.projection) {
                (None, _) => "",
                (Some(_), Some(_)) => " proj",
                (Some(_), None) => " id",
            }
        ));
    }
    s
}
