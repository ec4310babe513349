//! Layer kernels on channel-major activations.
//!
//! An activation with `c` channels, batch `n` and a `h x w` plane is stored
//! as `[c][n][h][w]`, so each channel is one contiguous run of `n * h * w`
//! values. Per-channel statistics and 1x1 convolutions then become plain
//! slice reductions and a single matrix product.

use rand::Rng;

use crate::linalg::{dot, gemm, sum};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Act {
    pub c: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, n: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            n,
            h,
            w,
            data: vec![0.0; c * n * h * w],
        }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Elements per channel.
    pub fn span(&self) -> usize {
        self.n * self.h * self.w
    }

    pub fn like(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            c: self.c,
            n: self.n,
            h: self.h,
            w: self.w,
            data,
        }
    }
}

/// "Same" padding: output `ceil(in / stride)`, surplus split with the extra
/// row/column after the input.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

/// Single-input-channel strided convolution, lowered to im2col + GEMM.
#[derive(Debug, Clone)]
pub struct StemConv {
    pub weight: Tensor,
    pub bias: Tensor,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
}

pub struct StemCache {
    cols: Vec<f64>,
}

impl StemConv {
    pub fn new<R: Rng + ?Sized>(
        channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let fan_in = kernel.0 * kernel.1;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[channels, 1, kernel.0, kernel.1], bound, rng),
            bias: Tensor::uniform(&[channels], bound, rng),
            kernel,
            stride,
        }
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            same_padding(h, self.kernel.0, self.stride.0).0,
            same_padding(w, self.kernel.1, self.stride.1).0,
        )
    }

    /// `x` is `[n][h][w]`.
    pub fn forward(&self, x: &[f64], n: usize, h: usize, w: usize) -> (Act, StemCache) {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ho, pad_t) = same_padding(h, kh, sh);
        let (wo, pad_l) = same_padding(w, kw, sw);
        let taps = kh * kw;
        let cols_n = n * ho * wo;
        let mut cols = vec![0.0; taps * cols_n];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[(ky * kw + kx) * cols_n..(ky * kw + kx + 1) * cols_n];
                for s in 0..n {
                    let img = &x[s * h * w..(s + 1) * h * w];
                    for oy in 0..ho {
                        let iy = (oy * sh + ky) as isize - pad_t as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &img[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[(s * ho + oy) * wo..(s * ho + oy + 1) * wo];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * sw + kx) as isize - pad_l as isize;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        let c = self.channels();
        let mut out = Act::zeros(c, n, ho, wo);
        for (ch, run) in out.data.chunks_mut(cols_n).enumerate() {
            run.fill(self.bias.data[ch]);
        }
        gemm(
            c,
            taps,
            cols_n,
            &self.weight.data,
            false,
            &cols,
            false,
            1.0,
            &mut out.data,
        );
        (out, StemCache { cols })
    }

    /// Parameter gradients only; the input is data, not a variable.
    pub fn backward(&self, cache: &StemCache, dy: &Act) -> (Vec<f64>, Vec<f64>) {
        let c = self.channels();
        let taps = self.kernel.0 * self.kernel.1;
        let span = dy.span();
        let mut dw = vec![0.0; c * taps];
        gemm(
            c,
            span,
            taps,
            &dy.data,
            false,
            &cache.cols,
            true,
            0.0,
            &mut dw,
        );
        let db = dy.data.chunks(span).map(sum).collect();
        (dw, db)
    }
}

/// 3x3 depthwise convolution, stride 1, zero padding 1.
#[derive(Debug, Clone)]
pub struct DepthwiseConv {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DepthwiseConv {
    pub fn new<R: Rng + ?Sized>(channels: usize, rng: &mut R) -> Self {
        let bound = 1.0 / 3.0;
        Self {
            weight: Tensor::uniform(&[channels, 1, 3, 3], bound, rng),
            bias: Tensor::uniform(&[channels], bound, rng),
        }
    }

    pub fn forward(&self, x: &Act) -> Act {
        let (h, w) = (x.h, x.w);
        let plane = x.plane();
        let pw = w + 2;
        let mut pad = vec![0.0; (h + 2) * pw];
        let mut out = Act::zeros(x.c, x.n, h, w);
        for ch in 0..x.c {
            let k: [f64; 9] = self.weight.data[ch * 9..ch * 9 + 9].try_into().unwrap();
            let b = self.bias.data[ch];
            for s in 0..x.n {
                let base = (ch * x.n + s) * plane;
                fill_padded(&mut pad, &x.data[base..base + plane], h, w);
                let dst = &mut out.data[base..base + plane];
                for oy in 0..h {
                    let r0 = &pad[oy * pw..oy * pw + pw];
                    let r1 = &pad[(oy + 1) * pw..(oy + 1) * pw + pw];
                    let r2 = &pad[(oy + 2) * pw..(oy + 2) * pw + pw];
                    for (ox, d) in dst[oy * w..oy * w + w].iter_mut().enumerate() {
                        *d = b
                            + k[0] * r0[ox]
                            + k[1] * r0[ox + 1]
                            + k[2] * r0[ox + 2]
                            + k[3] * r1[ox]
                            + k[4] * r1[ox + 1]
                            + k[5] * r1[ox + 2]
                            + k[6] * r2[ox]
                            + k[7] * r2[ox + 1]
                            + k[8] * r2[ox + 2];
                    }
                }
            }
        }
        out
    }

    /// Returns `(dx, dw, db)`.
    pub fn backward(&self, x: &Act, dy: &Act) -> (Act, Vec<f64>, Vec<f64>) {
        let (h, w) = (x.h, x.w);
        let plane = x.plane();
        let pw = w + 2;
        let mut xpad = vec![0.0; (h + 2) * pw];
        let mut gpad = vec![0.0; (h + 2) * pw];
        let mut dx = Act::zeros(x.c, x.n, h, w);
        let mut dw = vec![0.0; x.c * 9];
        let mut db = vec![0.0; x.c];
        for ch in 0..x.c {
            let k = &self.weight.data[ch * 9..ch * 9 + 9];
            let mut kgrad = [0.0; 9];
            let mut bgrad = 0.0;
            for s in 0..x.n {
                let base = (ch * x.n + s) * plane;
                let g = &dy.data[base..base + plane];
                fill_padded(&mut xpad, &x.data[base..base + plane], h, w);
                fill_padded(&mut gpad, g, h, w);
                bgrad += sum(g);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let mut acc = 0.0;
                        for oy in 0..h {
                            let xr = &xpad[(oy + ky) * pw + kx..(oy + ky) * pw + kx + w];
                            acc += dot(&g[oy * w..oy * w + w], xr);
                        }
                        kgrad[ky * 3 + kx] += acc;
                    }
                }
                // dx[i] = sum_k w[k] * dy[i - k + 1]: correlation with the
                // flipped kernel over the padded gradient.
                let dst = &mut dx.data[base..base + plane];
                for iy in 0..h {
                    let r0 = &gpad[(iy + 2) * pw..(iy + 2) * pw + pw];
                    let r1 = &gpad[(iy + 1) * pw..(iy + 1) * pw + pw];
                    let r2 = &gpad[iy * pw..iy * pw + pw];
                    for (ix, d) in dst[iy * w..iy * w + w].iter_mut().enumerate() {
                        *d = k[0] * r0[ix + 2]
                            + k[1] * r0[ix + 1]
                            + k[2] * r0[ix]
                            + k[3] * r1[ix + 2]
                            + k[4] * r1[ix + 1]
                            + k[5] * r1[ix]
                            + k[6] * r2[ix + 2]
                            + k[7] * r2[ix + 1]
                            + k[8] * r2[ix];
                    }
                }
            }
            dw[ch * 9..ch * 9 + 9].copy_from_slice(&kgrad);
            db[ch] = bgrad;
        }
        (dx, dw, db)
    }
}

/// Copies an `h x w` plane into the interior of a zero-bordered
/// `(h + 2) x (w + 2)` buffer.
fn fill_padded(pad: &mut [f64], src: &[f64], h: usize, w: usize) {
    let pw = w + 2;
    for y in 0..h {
        pad[(y + 1) * pw + 1..(y + 1) * pw + 1 + w].copy_from_slice(&src[y * w..y * w + w]);
    }
}

/// 1x1 convolution mixing channels.
#[derive(Debug, Clone)]
pub struct PointwiseConv {
    /// `[out, in]`
    pub weight: Tensor,
    pub bias: Tensor,
}

impl PointwiseConv {
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cin as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[cout, cin], bound, rng),
            bias: Tensor::uniform(&[cout], bound, rng),
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.weight.shape[0], self.weight.shape[1])
    }

    pub fn forward(&self, x: &Act) -> Act {
        let (cout, cin) = self.dims();
        debug_assert_eq!(cin, x.c);
        let span = x.span();
        let mut out = Act::zeros(cout, x.n, x.h, x.w);
        for (ch, run) in out.data.chunks_mut(span).enumerate() {
            run.fill(self.bias.data[ch]);
        }
        gemm(
            cout,
            cin,
            span,
            &self.weight.data,
            false,
            &x.data,
            false,
            1.0,
            &mut out.data,
        );
        out
    }

    pub fn backward(&self, x: &Act, dy: &Act) -> (Act, Vec<f64>, Vec<f64>) {
        let (cout, cin) = self.dims();
        let span = x.span();
        let mut dw = vec![0.0; cout * cin];
        gemm(
            cout, span, cin, &dy.data, false, &x.data, true, 0.0, &mut dw,
        );
        let mut dx = Act::zeros(cin, x.n, x.h, x.w);
        gemm(
            cin,
            cout,
            span,
            &self.weight.data,
            true,
            &dy.data,
            false,
            0.0,
            &mut dx.data,
        );
        let db = dy.data.chunks(span).map(sum).collect();
        (dx, dw, db)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
}

pub struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            eps,
            momentum,
        }
    }

    /// Batch statistics; also returns the per-channel mean and unbiased
    /// variance for the running-average update.
    pub fn forward_train(&self, x: &Act) -> (Act, NormCache, Vec<f64>, Vec<f64>) {
        let span = x.span();
        let mut y = vec![0.0; x.data.len()];
        let mut xhat = vec![0.0; x.data.len()];
        let mut inv_std = Vec::with_capacity(x.c);
        let mut means = Vec::with_capacity(x.c);
        let mut vars = Vec::with_capacity(x.c);
        for ch in 0..x.c {
            let run = &x.data[ch * span..(ch + 1) * span];
            let mean = sum(run) / span as f64;
            let xh = &mut xhat[ch * span..(ch + 1) * span];
            for (d, &v) in xh.iter_mut().zip(run) {
                *d = v - mean;
            }
            let var = dot(xh, xh) / span as f64;
            let inv = 1.0 / (var + self.eps).sqrt();
            let (g, b) = (self.gamma.data[ch], self.beta.data[ch]);
            for (xv, yv) in xh.iter_mut().zip(&mut y[ch * span..(ch + 1) * span]) {
                *xv *= inv;
                *yv = g * *xv + b;
            }
            inv_std.push(inv);
            means.push(mean);
            vars.push(if span > 1 {
                var * span as f64 / (span - 1) as f64
            } else {
                var
            });
        }
        (x.like(y), NormCache { xhat, inv_std }, means, vars)
    }

    pub fn update_running(&mut self, means: &[f64], vars: &[f64]) {
        let m = self.momentum;
        for (r, &v) in self.running_mean.data.iter_mut().zip(means) {
            *r = (1.0 - m) * *r + m * v;
        }
        for (r, &v) in self.running_var.data.iter_mut().zip(vars) {
            *r = (1.0 - m) * *r + m * v;
        }
    }

    pub fn forward_eval(&self, x: &Act) -> Act {
        let span = x.span();
        let mut y = x.data.clone();
        for ch in 0..x.c {
            let inv = 1.0 / (self.running_var.data[ch] + self.eps).sqrt();
            let scale = self.gamma.data[ch] * inv;
            let shift = self.beta.data[ch] - self.running_mean.data[ch] * scale;
            for v in &mut y[ch * span..(ch + 1) * span] {
                *v = *v * scale + shift;
            }
        }
        x.like(y)
    }

    pub fn backward(&self, cache: &NormCache, dy: &Act) -> (Act, Vec<f64>, Vec<f64>) {
        let span = dy.span();
        let m = span as f64;
        let mut dx = vec![0.0; dy.data.len()];
        let mut dgamma = vec![0.0; dy.c];
        let mut dbeta = vec![0.0; dy.c];
        for ch in 0..dy.c {
            let g = &dy.data[ch * span..(ch + 1) * span];
            let xh = &cache.xhat[ch * span..(ch + 1) * span];
            let sum_g = sum(g);
            let sum_gx = dot(g, xh);
            dgamma[ch] = sum_gx;
            dbeta[ch] = sum_g;
            let k = self.gamma.data[ch] * cache.inv_std[ch] / m;
            for ((d, &gv), &xv) in dx[ch * span..(ch + 1) * span].iter_mut().zip(g).zip(xh) {
                *d = k * (m * gv - sum_g - xv * sum_gx);
            }
        }
        (dy.like(dx), dgamma, dbeta)
    }
}

/// Normalization across channels at every spatial position.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(channels: usize, eps: f64) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            eps,
        }
    }

    pub fn forward(&self, x: &Act) -> (Act, NormCache) {
        let span = x.span();
        let c = x.c as f64;
        let mut mean = vec![0.0; span];
        for run in x.data.chunks_exact(span) {
            for (m, &v) in mean.iter_mut().zip(run) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= c);
        let mut xhat = x.data.clone();
        let mut var = vec![0.0; span];
        for run in xhat.chunks_exact_mut(span) {
            for ((d, &m), v) in run.iter_mut().zip(&mean).zip(&mut var) {
                *d -= m;
                *v += *d * *d;
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v / c + self.eps).sqrt())
            .collect();
        let mut y = vec![0.0; x.data.len()];
        for (ch, (run, yrun)) in xhat
            .chunks_exact_mut(span)
            .zip(y.chunks_exact_mut(span))
            .enumerate()
        {
            let (g, b) = (self.gamma.data[ch], self.beta.data[ch]);
            for ((d, yv), &inv) in run.iter_mut().zip(yrun).zip(&inv_std) {
                *d *= inv;
                *yv = g * *d + b;
            }
        }
        (x.like(y), NormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &NormCache, dy: &Act) -> (Act, Vec<f64>, Vec<f64>) {
        let span = dy.span();
        let c = dy.c as f64;
        let mut dgamma = vec![0.0; dy.c];
        let mut dbeta = vec![0.0; dy.c];
        let mut sum_d = vec![0.0; span];
        let mut sum_dx = vec![0.0; span];
        for ch in 0..dy.c {
            let g = &dy.data[ch * span..(ch + 1) * span];
            let xh = &cache.xhat[ch * span..(ch + 1) * span];
            dgamma[ch] = dot(g, xh);
            dbeta[ch] = sum(g);
            let gm = self.gamma.data[ch];
            for (((sd, sdx), &gv), &xv) in sum_d.iter_mut().zip(&mut sum_dx).zip(g).zip(xh) {
                *sd += gm * gv;
                *sdx += gm * gv * xv;
            }
        }
        let mut dx = vec![0.0; dy.data.len()];
        for ch in 0..dy.c {
            let g = &dy.data[ch * span..(ch + 1) * span];
            let xh = &cache.xhat[ch * span..(ch + 1) * span];
            let gm = self.gamma.data[ch];
            let out = &mut dx[ch * span..(ch + 1) * span];
            for p in 0..span {
                let d = gm * g[p];
                out[p] = cache.inv_std[p] / c * (c * d - sum_d[p] - xh[p] * sum_dx[p]);
            }
        }
        (dy.like(dx), dgamma, dbeta)
    }
}

/// NaN passes through so divergence stays visible downstream.
pub fn relu(x: &Act) -> Act {
    x.like(
        x.data
            .iter()
            .map(|&v| if v < 0.0 { 0.0 } else { v })
            .collect(),
    )
}

/// Gradient through ReLU given its output.
pub fn relu_backward(out: &Act, dy: &Act) -> Act {
    let mut g = dy.data.clone();
    for (v, &o) in g.iter_mut().zip(&out.data) {
        if !(o > 0.0) {
            *v = 0.0;
        }
    }
    dy.like(g)
}

/// Spatial mean per (sample, channel); result is `n x c`, row-major.
pub fn global_avg_pool(x: &Act) -> Vec<f64> {
    let plane = x.plane();
    let mut out = vec![0.0; x.n * x.c];
    for ch in 0..x.c {
        for s in 0..x.n {
            let base = (ch * x.n + s) * plane;
            out[s * x.c + ch] = sum(&x.data[base..base + plane]) / plane as f64;
        }
    }
    out
}

pub fn global_avg_pool_backward(d_pooled: &[f64], c: usize, n: usize, h: usize, w: usize) -> Act {
    let plane = h * w;
    let mut dx = Act::zeros(c, n, h, w);
    for ch in 0..c {
        for s in 0..n {
            let g = d_pooled[s * c + ch] / plane as f64;
            let base = (ch * n + s) * plane;
            dx.data[base..base + plane].fill(g);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_padding_matches_stride_rules() {
        assert_eq!(same_padding(49, 10, 2), (25, 4));
        assert_eq!(same_padding(10, 4, 2), (5, 1));
        assert_eq!(same_padding(10, 4, 1), (10, 1));
        assert_eq!(same_padding(25, 3, 1), (25, 1));
    }

    #[test]
    fn depthwise_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = DepthwiseConv::new(2, &mut rng);
        let mut x = Act::zeros(2, 2, 4, 3);
        for v in &mut x.data {
            *v = rng.random_range(-1.0..1.0);
        }
        let y = conv.forward(&x);
        for ch in 0..2 {
            for s in 0..2 {
                for i in 0..4 {
                    for j in 0..3 {
                        let mut acc = conv.bias.data[ch];
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (ii, jj) = (i as isize + ky - 1, j as isize + kx - 1);
                                if ii >= 0 && ii < 4 && jj >= 0 && jj < 3 {
                                    acc += conv.weight.data[ch * 9 + (ky * 3 + kx) as usize]
                                        * x.data
                                            [((ch * 2 + s) * 4 + ii as usize) * 3 + jj as usize];
                                }
                            }
                        }
                        let got = y.data[((ch * 2 + s) * 4 + i) * 3 + j];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn stem_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = StemConv::new(3, (4, 3), (2, 2), &mut rng);
        let (n, h, w) = (2, 7, 5);
        let x: Vec<f64> = (0..n * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let (y, _) = conv.forward(&x, n, h, w);
        let (ho, pt) = same_padding(h, 4, 2);
        let (wo, pl) = same_padding(w, 3, 2);
        assert_eq!((y.h, y.w), (ho, wo));
        for ch in 0..3 {
            for s in 0..n {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = conv.bias.data[ch];
                        for ky in 0..4 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as isize - pt as isize;
                                let ix = (ox * 2 + kx) as isize - pl as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += conv.weight.data[ch * 12 + ky * 3 + kx]
                                        * x[s * h * w + iy as usize * w + ix as usize];
                                }
                            }
                        }
                        let got = y.data[((ch * n + s) * ho + oy) * wo + ox];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn batchnorm_eval_after_full_momentum_matches_train() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut bn = BatchNorm::new(2, 1e-5, 1.0);
        let mut x = Act::zeros(2, 3, 2, 2);
        for v in &mut x.data {
            *v = rng.random_range(-2.0..2.0);
        }
        let (y_train, _, means, _) = bn.forward_train(&x);
        // With momentum 1 the running stats become the batch stats; feed the
        // biased variance so eval reproduces train exactly.
        let span = x.span() as f64;
        let vars: Vec<f64> = (0..2)
            .map(|c| {
                let run = &x.data[c * 12..(c + 1) * 12];
                run.iter().map(|v| (v - means[c]).powi(2)).sum::<f64>() / span
            })
            .collect();
        bn.update_running(&means, &vars);
        let y_eval = bn.forward_eval(&x);
        for (a, b) in y_train.data.iter().zip(&y_eval.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
