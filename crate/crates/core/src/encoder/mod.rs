//! Depthwise-separable convolutional speech encoders (DSCNN).
//!
//! Architecture: a strided 10x4 stem convolution with BatchNorm and ReLU,
//! then a stack of blocks `dw3x3 -> BN -> ReLU -> pw1x1 -> BN -> ReLU`, then
//! global average pooling. The head variant changes only the tail of the
//! last block:
//!
//! * `Conv`: the final ReLU is dropped, the pool sees the normalized
//!   pointwise output.
//! * `Relu`: unchanged, embeddings are non-negative.
//! * `Norm`: the final BatchNorm becomes a channel LayerNorm, the final ReLU
//!   is dropped and the pooled vector is L2-normalized.

mod checkpoint;
pub mod layers;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_KIND};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FeatureMap;
use crate::linalg::Matrix;
use layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, Act, BatchNorm, DepthwiseConv,
    LayerNorm, NormCache, PointwiseConv, StemCache, StemConv, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeVariant {
    #[serde(rename = "S")]
    Small,
    #[serde(rename = "L")]
    Large,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    #[serde(rename = "CONV")]
    Conv,
    #[serde(rename = "RELU")]
    Relu,
    #[serde(rename = "NORM")]
    Norm,
}

impl fmt::Display for SizeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeVariant::Small => "S",
            SizeVariant::Large => "L",
            SizeVariant::Custom => "custom",
        })
    }
}

impl FromStr for SizeVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(SizeVariant::Small),
            "L" | "l" => Ok(SizeVariant::Large),
            "custom" => Ok(SizeVariant::Custom),
            _ => Err(Error::InvalidArgument(format!(
                "unknown size variant {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Conv => "CONV",
            Head::Relu => "RELU",
            Head::Norm => "NORM",
        })
    }
}

impl FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CONV" => Ok(Head::Conv),
            "RELU" => Ok(Head::Relu),
            "NORM" => Ok(Head::Norm),
            _ => Err(Error::InvalidArgument(format!("unknown head {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub size: SizeVariant,
    pub head: Head,
    pub channels: usize,
    pub num_blocks: usize,
    pub stem_kernel: (usize, usize),
    pub stem_stride: (usize, usize),
    pub input_frames: usize,
    pub input_coeffs: usize,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub ln_eps: f64,
}

impl EncoderConfig {
    /// DSCNN-S: 64 channels, four blocks, stem stride 2x2.
    pub fn small(head: Head) -> Self {
        Self {
            size: SizeVariant::Small,
            head,
            channels: 64,
            num_blocks: 4,
            stem_kernel: (10, 4),
            stem_stride: (2, 2),
            input_frames: 49,
            input_coeffs: 10,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            ln_eps: 1e-5,
        }
    }

    /// DSCNN-L: 256 channels, five blocks, stem stride 2x1.
    pub fn large(head: Head) -> Self {
        Self {
            size: SizeVariant::Large,
            channels: 256,
            num_blocks: 5,
            stem_stride: (2, 1),
            ..Self::small(head)
        }
    }

    pub fn custom(head: Head, channels: usize, num_blocks: usize) -> Self {
        Self {
            size: SizeVariant::Custom,
            channels,
            num_blocks,
            ..Self::small(head)
        }
    }

    pub fn for_variant(size: SizeVariant, head: Head) -> Result<Self> {
        match size {
            SizeVariant::Small => Ok(Self::small(head)),
            SizeVariant::Large => Ok(Self::large(head)),
            SizeVariant::Custom => Err(Error::InvalidArgument(
                "custom encoders need explicit channels and blocks".into(),
            )),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.num_blocks == 0 {
            return Err(Error::InvalidArgument(
                "encoder needs at least one channel and one block".into(),
            ));
        }
        let (kh, kw) = self.stem_kernel;
        let (sh, sw) = self.stem_stride;
        if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
            return Err(Error::InvalidArgument("zero stem kernel or stride".into()));
        }
        if self.input_frames == 0 || self.input_coeffs == 0 {
            return Err(Error::InvalidArgument("empty input shape".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Param,
    Buffer,
}

#[derive(Debug, Clone)]
enum BlockNorm {
    Batch(BatchNorm),
    Layer(LayerNorm),
}

#[derive(Debug, Clone)]
struct DsBlock {
    dw: DepthwiseConv,
    dw_bn: BatchNorm,
    pw: PointwiseConv,
    pw_norm: BlockNorm,
    /// False only on the last block of CONV and NORM encoders.
    out_relu: bool,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    seed: u64,
    stem: StemConv,
    stem_bn: BatchNorm,
    blocks: Vec<DsBlock>,
}

struct BlockTrace {
    input: Act,
    dw_norm: NormCache,
    mid: Act,
    pw_norm: NormCache,
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardTrace {
    stem: StemCache,
    stem_norm: NormCache,
    blocks: Vec<BlockTrace>,
    pool_in_dims: (usize, usize, usize, usize),
    /// Final block output (pool input); needed when the last ReLU is kept.
    last_out: Act,
    /// Pooled vectors before L2 normalization, `n x c`.
    pooled: Vec<f64>,
    pooled_norms: Vec<f64>,
}

/// Parameter gradients in [`Encoder::visit`] parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads(pub Vec<Vec<f64>>);

impl EncoderGrads {
    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}

const PARAMS_PER_BLOCK: usize = 8;

impl Encoder {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let stem = StemConv::new(c, config.stem_kernel, config.stem_stride, &mut rng);
        let stem_bn = BatchNorm::new(c, config.bn_eps, config.bn_momentum);
        let blocks = (0..config.num_blocks)
            .map(|i| {
                let last = i + 1 == config.num_blocks;
                let dw = DepthwiseConv::new(c, &mut rng);
                let pw = PointwiseConv::new(c, c, &mut rng);
                let pw_norm = if last && config.head == Head::Norm {
                    BlockNorm::Layer(LayerNorm::new(c, config.ln_eps))
                } else {
                    BlockNorm::Batch(BatchNorm::new(c, config.bn_eps, config.bn_momentum))
                };
                DsBlock {
                    dw,
                    dw_bn: BatchNorm::new(c, config.bn_eps, config.bn_momentum),
                    pw,
                    pw_norm,
                    out_relu: !last || config.head == Head::Relu,
                }
            })
            .collect();
        Ok(Self {
            config,
            seed,
            stem,
            stem_bn,
            blocks,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim()
    }

    /// Walks every named tensor in a fixed order: parameters interleaved
    /// with their layer's buffers.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &Tensor, TensorKind)) {
        use TensorKind::*;
        f("stem.conv.weight", &self.stem.weight, Param);
        f("stem.conv.bias", &self.stem.bias, Param);
        visit_bn("stem.bn", &self.stem_bn, f);
        for (i, b) in self.blocks.iter().enumerate() {
            f(&format!("blocks.{i}.dw.weight"), &b.dw.weight, Param);
            f(&format!("blocks.{i}.dw.bias"), &b.dw.bias, Param);
            visit_bn(&format!("blocks.{i}.dw_bn"), &b.dw_bn, f);
            f(&format!("blocks.{i}.pw.weight"), &b.pw.weight, Param);
            f(&format!("blocks.{i}.pw.bias"), &b.pw.bias, Param);
            match &b.pw_norm {
                BlockNorm::Batch(bn) => visit_bn(&format!("blocks.{i}.pw_bn"), bn, f),
                BlockNorm::Layer(ln) => {
                    f(&format!("blocks.{i}.pw_ln.weight"), &ln.gamma, Param);
                    f(&format!("blocks.{i}.pw_ln.bias"), &ln.beta, Param);
                }
            }
        }
    }

    /// Mutable counterpart of [`Encoder::visit`], same order.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor, TensorKind)) {
        use TensorKind::*;
        f("stem.conv.weight", &mut self.stem.weight, Param);
        f("stem.conv.bias", &mut self.stem.bias, Param);
        visit_bn_mut("stem.bn", &mut self.stem_bn, f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(&format!("blocks.{i}.dw.weight"), &mut b.dw.weight, Param);
            f(&format!("blocks.{i}.dw.bias"), &mut b.dw.bias, Param);
            visit_bn_mut(&format!("blocks.{i}.dw_bn"), &mut b.dw_bn, f);
            f(&format!("blocks.{i}.pw.weight"), &mut b.pw.weight, Param);
            f(&format!("blocks.{i}.pw.bias"), &mut b.pw.bias, Param);
            match &mut b.pw_norm {
                BlockNorm::Batch(bn) => visit_bn_mut(&format!("blocks.{i}.pw_bn"), bn, f),
                BlockNorm::Layer(ln) => {
                    f(&format!("blocks.{i}.pw_ln.weight"), &mut ln.gamma, Param);
                    f(&format!("blocks.{i}.pw_ln.bias"), &mut ln.beta, Param);
                }
            }
        }
    }

    /// Trainable parameter count (running statistics excluded).
    pub fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t, kind| {
            if kind == TensorKind::Param {
                n += t.len();
            }
        });
        n
    }

    pub fn param_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, t, kind| {
            if kind == TensorKind::Param {
                out.extend_from_slice(&t.data);
            }
        });
        out
    }

    pub fn set_param_values(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.num_parameters();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameter values, got {}",
                values.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, t, kind| {
            if kind == TensorKind::Param {
                let n = t.len();
                t.data.copy_from_slice(&values[offset..offset + n]);
                offset += n;
            }
        });
        Ok(())
    }

    /// Applies `f(param, grad)` to every parameter tensor with its gradient.
    pub fn for_each_param_mut(
        &mut self,
        grads: &EncoderGrads,
        f: &mut dyn FnMut(usize, &mut [f64], &[f64]),
    ) {
        let mut idx = 0;
        self.visit_mut(&mut |_, t, kind| {
            if kind == TensorKind::Param {
                f(idx, &mut t.data, &grads.0[idx]);
                idx += 1;
            }
        });
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.visit(&mut |_, t, kind| {
            if kind == TensorKind::Param {
                out.push(t.shape.clone());
            }
        });
        out
    }

    fn stack_input(&self, batch: &[FeatureMap]) -> Result<Vec<f64>> {
        let (h, w) = (self.config.input_frames, self.config.input_coeffs);
        let mut x = Vec::with_capacity(batch.len() * h * w);
        for (i, fm) in batch.iter().enumerate() {
            if fm.shape() != (h, w) {
                return Err(Error::Shape(format!(
                    "feature map {i} is {}x{}, encoder expects {h}x{w}",
                    fm.frames, fm.coeffs
                )));
            }
            x.extend_from_slice(&fm.values);
        }
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(x)
    }

    /// Eval-mode forward pass: running statistics, no state change.
    pub fn embed(&self, batch: &[FeatureMap]) -> Result<Matrix> {
        let a = self.pool_input(batch)?;
        let mut pooled = global_avg_pool(&a);
        if self.config.head == Head::Norm {
            normalize_rows(&mut pooled, a.c)?;
        }
        finish(pooled, batch.len(), a.c)
    }

    /// Activations fed to the global pool in eval mode, `[c][n][h][w]`.
    pub fn pool_input(&self, batch: &[FeatureMap]) -> Result<Act> {
        let x = self.stack_input(batch)?;
        let (h, w) = (self.config.input_frames, self.config.input_coeffs);
        let (a, _) = self.stem.forward(&x, batch.len(), h, w);
        let mut a = relu(&self.stem_bn.forward_eval(&a));
        for b in &self.blocks {
            let mid = relu(&b.dw_bn.forward_eval(&b.dw.forward(&a)));
            let p = b.pw.forward(&mid);
            let normed = match &b.pw_norm {
                BlockNorm::Batch(bn) => bn.forward_eval(&p),
                BlockNorm::Layer(ln) => ln.forward(&p).0,
            };
            a = if b.out_relu { relu(&normed) } else { normed };
        }
        Ok(a)
    }

    /// Training-mode forward pass with batch statistics. Running statistics
    /// are updated.
    pub fn forward_train(&mut self, batch: &[FeatureMap]) -> Result<(Matrix, ForwardTrace)> {
        let x = self.stack_input(batch)?;
        let n = batch.len();
        let (h, w) = (self.config.input_frames, self.config.input_coeffs);
        let (a, stem_cache) = self.stem.forward(&x, n, h, w);
        let (a, stem_norm, m, v) = self.stem_bn.forward_train(&a);
        self.stem_bn.update_running(&m, &v);
        let mut a = relu(&a);
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &mut self.blocks {
            let (d, dw_norm, m, v) = b.dw_bn.forward_train(&b.dw.forward(&a));
            b.dw_bn.update_running(&m, &v);
            let mid = relu(&d);
            let p = b.pw.forward(&mid);
            let (normed, pw_norm) = match &mut b.pw_norm {
                BlockNorm::Batch(bn) => {
                    let (y, cache, m, v) = bn.forward_train(&p);
                    bn.update_running(&m, &v);
                    (y, cache)
                }
                BlockNorm::Layer(ln) => ln.forward(&p),
            };
            let out = if b.out_relu { relu(&normed) } else { normed };
            traces.push(BlockTrace {
                input: std::mem::replace(&mut a, out),
                dw_norm,
                mid,
                pw_norm,
            });
        }
        let pooled = global_avg_pool(&a);
        let c = a.c;
        let mut emb = pooled.clone();
        let mut pooled_norms = Vec::new();
        if self.config.head == Head::Norm {
            pooled_norms = normalize_rows(&mut emb, c)?;
        }
        let trace = ForwardTrace {
            stem: stem_cache,
            stem_norm,
            blocks: traces,
            pool_in_dims: (a.c, a.n, a.h, a.w),
            last_out: a,
            pooled,
            pooled_norms,
        };
        Ok((finish(emb, n, c)?, trace))
    }

    /// Backpropagates `d_emb` (`n x embedding_dim`) through a trace from
    /// [`Encoder::forward_train`].
    pub fn backward(&self, trace: &ForwardTrace, d_emb: &Matrix) -> Result<EncoderGrads> {
        let (c, n, h, w) = trace.pool_in_dims;
        if d_emb.rows() != n || d_emb.cols() != c {
            return Err(Error::Shape(format!(
                "embedding gradient is {}x{}, trace is {n}x{c}",
                d_emb.rows(),
                d_emb.cols()
            )));
        }
        let mut d_pooled = d_emb.as_slice().to_vec();
        if self.config.head == Head::Norm {
            for s in 0..n {
                let v = &trace.pooled[s * c..(s + 1) * c];
                let norm = trace.pooled_norms[s];
                let g = &mut d_pooled[s * c..(s + 1) * c];
                // e = v/|v|  =>  dv = (g - e (e.g)) / |v|
                let eg: f64 = v.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / norm;
                for (gi, &vi) in g.iter_mut().zip(v) {
                    *gi = (*gi - vi / norm * eg) / norm;
                }
            }
        }
        let mut da = global_avg_pool_backward(&d_pooled, c, n, h, w);

        let nb = self.blocks.len();
        let mut grads = vec![Vec::new(); 4 + PARAMS_PER_BLOCK * nb];
        for (i, (b, t)) in self.blocks.iter().zip(&trace.blocks).enumerate().rev() {
            let base = 4 + PARAMS_PER_BLOCK * i;
            if b.out_relu {
                let out = if i + 1 == nb {
                    &trace.last_out
                } else {
                    &trace.blocks[i + 1].input
                };
                da = relu_backward(out, &da);
            }
            let (dp, dg, dbeta) = match &b.pw_norm {
                BlockNorm::Batch(bn) => bn.backward(&t.pw_norm, &da),
                BlockNorm::Layer(ln) => ln.backward(&t.pw_norm, &da),
            };
            grads[base + 6] = dg;
            grads[base + 7] = dbeta;
            let (dmid, dw, db) = b.pw.backward(&t.mid, &dp);
            grads[base + 4] = dw;
            grads[base + 5] = db;
            let dmid = relu_backward(&t.mid, &dmid);
            let (dd, dg, dbeta) = b.dw_bn.backward(&t.dw_norm, &dmid);
            grads[base + 2] = dg;
            grads[base + 3] = dbeta;
            let (dx, dw, db) = b.dw.backward(&t.input, &dd);
            grads[base] = dw;
            grads[base + 1] = db;
            da = dx;
        }
        let stem_out = trace
            .blocks
            .first()
            .map(|t| &t.input)
            .unwrap_or(&trace.last_out);
        let da = relu_backward(stem_out, &da);
        let (ds, dg, dbeta) = self.stem_bn.backward(&trace.stem_norm, &da);
        grads[2] = dg;
        grads[3] = dbeta;
        let (dw, db) = self.stem.backward(&trace.stem, &ds);
        grads[0] = dw;
        grads[1] = db;
        Ok(EncoderGrads(grads))
    }

    /// Replaces every named tensor from `lookup`, checking shapes.
    pub(crate) fn load_tensors(
        &mut self,
        lookup: &mut dyn FnMut(&str) -> Option<Tensor>,
    ) -> Result<()> {
        let mut err = None;
        self.visit_mut(&mut |name, t, _| {
            if err.is_some() {
                return;
            }
            match lookup(name) {
                None => err = Some(Error::Format(format!("missing tensor {name}"))),
                Some(src) if src.shape != t.shape => {
                    err = Some(Error::Shape(format!(
                        "tensor {name}: stored shape {:?}, config implies {:?}",
                        src.shape, t.shape
                    )))
                }
                Some(src) => *t = src,
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn visit_bn(prefix: &str, bn: &BatchNorm, f: &mut dyn FnMut(&str, &Tensor, TensorKind)) {
    f(&format!("{prefix}.weight"), &bn.gamma, TensorKind::Param);
    f(&format!("{prefix}.bias"), &bn.beta, TensorKind::Param);
    f(
        &format!("{prefix}.running_mean"),
        &bn.running_mean,
        TensorKind::Buffer,
    );
    f(
        &format!("{prefix}.running_var"),
        &bn.running_var,
        TensorKind::Buffer,
    );
}

fn visit_bn_mut(
    prefix: &str,
    bn: &mut BatchNorm,
    f: &mut dyn FnMut(&str, &mut Tensor, TensorKind),
) {
    f(
        &format!("{prefix}.weight"),
        &mut bn.gamma,
        TensorKind::Param,
    );
    f(&format!("{prefix}.bias"), &mut bn.beta, TensorKind::Param);
    f(
        &format!("{prefix}.running_mean"),
        &mut bn.running_mean,
        TensorKind::Buffer,
    );
    f(
        &format!("{prefix}.running_var"),
        &mut bn.running_var,
        TensorKind::Buffer,
    );
}

/// L2-normalizes each `c`-wide row in place and returns the original norms.
fn normalize_rows(rows: &mut [f64], c: usize) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(rows.len() / c);
    for row in rows.chunks_mut(c) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonFinite(format!(
                "cannot L2-normalize embedding with norm {norm}"
            )));
        }
        row.iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    Ok(norms)
}

fn finish(values: Vec<f64>, n: usize, c: usize) -> Result<Matrix> {
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "encoder produced a non-finite activation for sample {}",
            bad / c
        )));
    }
    Matrix::from_vec(n, c, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    pub(crate) fn random_batch(n: usize, seed: u64) -> Vec<FeatureMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                FeatureMap::new(
                    49,
                    10,
                    (0..490).map(|_| rng.random_range(-3.0..3.0)).collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn parameter_counts_in_band() {
        let s = Encoder::new(EncoderConfig::small(Head::Relu), 0).unwrap();
        let l = Encoder::new(EncoderConfig::large(Head::Relu), 0).unwrap();
        assert!(
            (17_600..=26_400).contains(&s.num_parameters()),
            "{}",
            s.num_parameters()
        );
        assert!(
            (325_600..=488_400).contains(&l.num_parameters()),
            "{}",
            l.num_parameters()
        );
        // LayerNorm swaps one BatchNorm for the same number of parameters.
        let sn = Encoder::new(EncoderConfig::small(Head::Norm), 0).unwrap();
        assert_eq!(sn.num_parameters(), s.num_parameters());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Encoder::new(EncoderConfig::small(Head::Conv), 9).unwrap();
        let b = Encoder::new(EncoderConfig::small(Head::Conv), 9).unwrap();
        let c = Encoder::new(EncoderConfig::small(Head::Conv), 10).unwrap();
        assert_eq!(a.param_values(), b.param_values());
        assert_ne!(a.param_values(), c.param_values());
    }

    #[test]
    fn head_contracts() {
        let batch = random_batch(6, 1);
        let relu_enc = Encoder::new(EncoderConfig::small(Head::Relu), 1).unwrap();
        let e = relu_enc.embed(&batch).unwrap();
        assert_eq!(e.cols(), 64);
        assert!(e.as_slice().iter().all(|&v| v >= 0.0));

        let norm_enc = Encoder::new(EncoderConfig::small(Head::Norm), 1).unwrap();
        for row in norm_enc.embed(&batch).unwrap().iter_rows() {
            assert!((crate::linalg::norm(row) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn relu_head_is_rectified_conv_pool_input() {
        // Same trunk weights: CONV and RELU encoders from one seed differ only
        // in the last ReLU.
        let batch = random_batch(3, 2);
        let conv = Encoder::new(EncoderConfig::small(Head::Conv), 5).unwrap();
        let relu_enc = Encoder::new(EncoderConfig::small(Head::Relu), 5).unwrap();
        let pre = conv.pool_input(&batch).unwrap();
        let rectified = layers::relu(&pre);
        let expected = global_avg_pool(&rectified);
        let got = relu_enc.embed(&batch).unwrap();
        for (a, b) in got.as_slice().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let conv_emb = conv.embed(&batch).unwrap();
        for (a, b) in conv_emb.as_slice().iter().zip(global_avg_pool(&pre)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_forward_is_pure_and_train_updates_stats() {
        let batch = random_batch(4, 3);
        let mut enc = Encoder::new(EncoderConfig::custom(Head::Relu, 8, 2), 3).unwrap();
        let snapshot = enc.clone();
        let a = enc.embed(&batch).unwrap();
        let b = enc.embed(&batch).unwrap();
        assert_eq!(a, b);
        let mut bufs_before = Vec::new();
        snapshot.visit(&mut |_, t, k| {
            if k == TensorKind::Buffer {
                bufs_before.push(t.data.clone())
            }
        });
        enc.forward_train(&batch).unwrap();
        let mut bufs_after = Vec::new();
        enc.visit(&mut |_, t, k| {
            if k == TensorKind::Buffer {
                bufs_after.push(t.data.clone())
            }
        });
        assert_ne!(bufs_before, bufs_after);
        assert_eq!(snapshot.param_values(), enc.param_values());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let enc = Encoder::new(EncoderConfig::custom(Head::Conv, 4, 1), 0).unwrap();
        let bad = vec![FeatureMap::new(48, 10, vec![0.0; 480]).unwrap()];
        assert!(matches!(enc.embed(&bad), Err(Error::Shape(_))));
        assert!(matches!(enc.embed(&[]), Err(Error::Shape(_))));
    }

    #[test]
    fn non_finite_input_is_reported() {
        let enc = Encoder::new(EncoderConfig::custom(Head::Conv, 4, 1), 0).unwrap();
        let mut fm = random_batch(1, 0).pop().unwrap();
        fm.values[7] = f64::NAN;
        assert!(matches!(enc.embed(&[fm]), Err(Error::NonFinite(_))));
    }
}
