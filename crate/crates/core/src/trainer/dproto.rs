//! Set-function generator of dummy "unknown" prototypes.
//!
//! Each known prototype is concatenated with the set mean and passed through
//! a shared hidden layer; every output head then forms an attention-weighted
//! sum of per-head value projections. Mean pooling and the softmax-weighted
//! sum make the output independent of prototype order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::container::Container;
use crate::encoder::layers::Tensor;
use crate::error::{Error, Result};
use crate::linalg::{dot, softmax, Matrix};

pub const DEFAULT_DUMMIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DummyProtoGenerator {
    dim: usize,
    heads: usize,
    /// `[dim, 2 * dim]`
    w1: Tensor,
    b1: Tensor,
    /// `[heads, dim, dim]`
    w_val: Tensor,
    /// `[heads, dim]`
    b_val: Tensor,
    /// `[heads, dim]`
    attn: Tensor,
}

pub struct GeneratorTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    /// `[head][j]`
    alpha: Vec<Vec<f64>>,
    /// `[head][j]` value vectors
    values: Vec<Vec<Vec<f64>>>,
}

impl DummyProtoGenerator {
    pub fn new(dim: usize, heads: usize, seed: u64) -> Result<Self> {
        if dim == 0 || heads == 0 {
            return Err(Error::InvalidArgument(
                "generator needs a positive dimension and head count".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b_in = 1.0 / ((2 * dim) as f64).sqrt();
        let b_h = 1.0 / (dim as f64).sqrt();
        Ok(Self {
            dim,
            heads,
            w1: Tensor::uniform(&[dim, 2 * dim], b_in, &mut rng),
            b1: Tensor::uniform(&[dim], b_in, &mut rng),
            w_val: Tensor::uniform(&[heads, dim, dim], b_h, &mut rng),
            b_val: Tensor::uniform(&[heads, dim], b_h, &mut rng),
            attn: Tensor::uniform(&[heads, dim], b_h, &mut rng),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 5] {
        [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w_val", &self.w_val),
            ("b_val", &self.b_val),
            ("attn", &self.attn),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w_val,
            &mut self.b_val,
            &mut self.attn,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn param_values(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.data.iter().copied())
            .collect()
    }

    pub fn set_param_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::Shape("generator parameter count mismatch".into()));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data.copy_from_slice(&values[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Applies `f(slot, param, grad)` per tensor, in a fixed order.
    pub fn for_each_param_mut(
        &mut self,
        grads: &[Vec<f64>],
        f: &mut dyn FnMut(usize, &mut [f64], &[f64]),
    ) {
        for (i, t) in self.tensors_mut().into_iter().enumerate() {
            f(i, &mut t.data, &grads[i]);
        }
    }

    pub fn generate(&self, prototypes: &Matrix) -> Result<Matrix> {
        Ok(self.forward(prototypes)?.0)
    }

    pub fn forward(&self, prototypes: &Matrix) -> Result<(Matrix, GeneratorTrace)> {
        let d = self.dim;
        if prototypes.cols() != d {
            return Err(Error::Shape(format!(
                "generator expects {d}-dim prototypes, got {}",
                prototypes.cols()
            )));
        }
        let n = prototypes.rows();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "generator needs at least one prototype".into(),
            ));
        }
        let mut mean = vec![0.0; d];
        for row in prototypes.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n as f64;
            }
        }
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut hidden = Vec::with_capacity(n);
        for row in prototypes.iter_rows() {
            let z: Vec<f64> = row.iter().chain(&mean).copied().collect();
            let a: Vec<f64> = (0..d)
                .map(|o| self.b1.data[o] + dot(&self.w1.data[o * 2 * d..(o + 1) * 2 * d], &z))
                .collect();
            hidden.push(a.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
            pre.push(a);
            inputs.push(z);
        }
        let mut out = Matrix::zeros(self.heads, d);
        let mut alpha = Vec::with_capacity(self.heads);
        let mut values = Vec::with_capacity(self.heads);
        for t in 0..self.heads {
            let u = &self.attn.data[t * d..(t + 1) * d];
            let scores: Vec<f64> = hidden.iter().map(|h| dot(u, h)).collect();
            let a = softmax(&scores);
            let wv = &self.w_val.data[t * d * d..(t + 1) * d * d];
            let bv = &self.b_val.data[t * d..(t + 1) * d];
            let vs: Vec<Vec<f64>> = hidden
                .iter()
                .map(|h| {
                    (0..d)
                        .map(|o| bv[o] + dot(&wv[o * d..(o + 1) * d], h))
                        .collect()
                })
                .collect();
            let row = out.row_mut(t);
            for (aj, v) in a.iter().zip(&vs) {
                for (r, vi) in row.iter_mut().zip(v) {
                    *r += aj * vi;
                }
            }
            alpha.push(a);
            values.push(vs);
        }
        Ok((
            out,
            GeneratorTrace {
                inputs,
                pre,
                hidden,
                alpha,
                values,
            },
        ))
    }

    /// Returns parameter gradients (in `for_each_param_mut` order) and the
    /// gradient w.r.t. the input prototypes.
    pub fn backward(&self, trace: &GeneratorTrace, d_out: &Matrix) -> (Vec<Vec<f64>>, Matrix) {
        let d = self.dim;
        let n = trace.hidden.len();
        let mut dw1 = vec![0.0; d * 2 * d];
        let mut db1 = vec![0.0; d];
        let mut dwv = vec![0.0; self.heads * d * d];
        let mut dbv = vec![0.0; self.heads * d];
        let mut dattn = vec![0.0; self.heads * d];
        let mut dh = vec![vec![0.0; d]; n];
        for t in 0..self.heads {
            let g = d_out.row(t);
            let a = &trace.alpha[t];
            let u = &self.attn.data[t * d..(t + 1) * d];
            let wv = &self.w_val.data[t * d * d..(t + 1) * d * d];
            let dalpha: Vec<f64> = trace.values[t].iter().map(|v| dot(g, v)).collect();
            let mix: f64 = a.iter().zip(&dalpha).map(|(x, y)| x * y).sum();
            for j in 0..n {
                let h = &trace.hidden[j];
                let dscore = a[j] * (dalpha[j] - mix);
                for (k, hk) in h.iter().enumerate() {
                    dattn[t * d + k] += dscore * hk;
                    dh[j][k] += dscore * u[k];
                }
                // value projection: v = Wv h + bv, dv = a_j g
                for o in 0..d {
                    let dv = a[j] * g[o];
                    dbv[t * d + o] += dv;
                    let wrow = &wv[o * d..(o + 1) * d];
                    let drow = &mut dwv[t * d * d + o * d..t * d * d + (o + 1) * d];
                    for k in 0..d {
                        drow[k] += dv * h[k];
                        dh[j][k] += dv * wrow[k];
                    }
                }
            }
        }
        let mut d_protos = Matrix::zeros(n, d);
        let mut d_mean = vec![0.0; d];
        for j in 0..n {
            let z = &trace.inputs[j];
            for o in 0..d {
                if trace.pre[j][o] <= 0.0 {
                    continue;
                }
                let da = dh[j][o];
                db1[o] += da;
                let wrow = &self.w1.data[o * 2 * d..(o + 1) * 2 * d];
                let drow = &mut dw1[o * 2 * d..(o + 1) * 2 * d];
                for k in 0..2 * d {
                    drow[k] += da * z[k];
                }
                for k in 0..d {
                    d_protos.row_mut(j)[k] += da * wrow[k];
                    d_mean[k] += da * wrow[d + k];
                }
            }
        }
        for j in 0..n {
            for (dp, dm) in d_protos.row_mut(j).iter_mut().zip(&d_mean) {
                *dp += dm / n as f64;
            }
        }
        (vec![dw1, db1, dwv, dbv, dattn], d_protos)
    }

    pub fn write_into(&self, c: &mut Container, prefix: &str) {
        c.set_meta(&format!("{prefix}.dim"), self.dim);
        c.set_meta(&format!("{prefix}.heads"), self.heads);
        for (name, t) in self.tensors() {
            c.insert(format!("{prefix}.{name}"), t.clone());
        }
    }

    pub fn read_from(c: &Container, prefix: &str) -> Result<Self> {
        let dim = c.meta_parse(&format!("{prefix}.dim"))?;
        let heads = c.meta_parse(&format!("{prefix}.heads"))?;
        let mut g = Self::new(dim, heads, 0)?;
        let names = ["w1", "b1", "w_val", "b_val", "attn"];
        for (name, t) in names.iter().zip(g.tensors_mut()) {
            let src = c.tensor(&format!("{prefix}.{name}"))?;
            if src.shape != t.shape {
                return Err(Error::Shape(format!(
                    "generator tensor {name}: stored {:?}, expected {:?}",
                    src.shape, t.shape
                )));
            }
            *t = src.clone();
        }
        Ok(g)
    }
}
