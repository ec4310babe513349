use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::encoder::layers::Tensor;
use crate::error::{Error, Result};

/// Step-decay learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub base: f64,
    /// Epoch (0-based) from which the decayed rate applies.
    pub decay_epoch: usize,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base: 1e-3,
            decay_epoch: 20,
            factor: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize) -> f64 {
        if epoch >= self.decay_epoch {
            self.base * self.factor
        } else {
            self.base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) || !(self.factor > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate and decay factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with per-slot moment buffers. A slot is one parameter tensor; slots
/// are created lazily on first use and addressed by a stable index.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl Adam {
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Starts a new step; call once before updating the slots of that step.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn update(&mut self, slot: usize, lr: f64, param: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(param.len(), grad.len());
        if self.m.len() <= slot {
            self.m.resize(slot + 1, Vec::new());
            self.v.resize(slot + 1, Vec::new());
        }
        if self.m[slot].len() != param.len() {
            self.m[slot] = vec![0.0; param.len()];
            self.v[slot] = vec![0.0; param.len()];
        }
        let t = self.step.max(1) as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            param[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }

    pub fn write_into(&self, c: &mut Container) {
        c.set_meta("adam.step", self.step);
        c.set_meta("adam.slots", self.m.len());
        c.set_meta("adam.beta1", self.beta1);
        c.set_meta("adam.beta2", self.beta2);
        c.set_meta("adam.eps", self.eps);
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            c.insert(format!("adam.m.{i}"), vec_tensor(m));
            c.insert(format!("adam.v.{i}"), vec_tensor(v));
        }
    }

    pub fn read_from(c: &Container) -> Result<Self> {
        let slots: usize = c.meta_parse("adam.slots")?;
        let mut m = Vec::with_capacity(slots);
        let mut v = Vec::with_capacity(slots);
        for i in 0..slots {
            m.push(c.tensor(&format!("adam.m.{i}"))?.data.clone());
            v.push(c.tensor(&format!("adam.v.{i}"))?.data.clone());
        }
        Ok(Self {
            beta1: c.meta_parse("adam.beta1")?,
            beta2: c.meta_parse("adam.beta2")?,
            eps: c.meta_parse("adam.eps")?,
            step: c.meta_parse("adam.step")?,
            m,
            v,
        })
    }
}

fn vec_tensor(v: &[f64]) -> Tensor {
    Tensor {
        shape: vec![v.len()],
        data: v.to_vec(),
    }
}
