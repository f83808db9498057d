use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Exponential decay from `start` to `end` over `steps` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub start: f64,
    pub end: f64,
    pub steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            start: 1e-4,
            end: 1e-5,
            steps: 1,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.steps == 0 {
            return self.start;
        }
        let t = (step.min(self.steps)) as f64 / self.steps as f64;
        self.start * (self.end / self.start).powf(t)
    }
}

impl Adam {
    /// One bias-corrected Adam update of every tensor in `store`.
    pub fn step(&self, store: &mut ParamStore, grads: &[Matrix], lr: f64) -> Result<()> {
        if grads.len() != store.values.len() {
            return Err(Error::shape(
                "adam",
                format!("{} gradients for {} tensors", grads.len(), store.len()),
            ));
        }
        if let Some((i, _)) = grads
            .iter()
            .zip(&store.values)
            .enumerate()
            .find(|(_, (g, p))| g.shape() != p.shape())
        {
            return Err(Error::shape("adam", format!("gradient {i} shape mismatch")));
        }
        store.step += 1;
        let t = store.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in store
            .values
            .iter_mut()
            .zip(grads)
            .zip(store.m.iter_mut().zip(store.v.iter_mut()))
        {
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = self.beta1 * m.data[j] + (1.0 - self.beta1) * gj;
                v.data[j] = self.beta2 * v.data[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m.data[j] / c1;
                let vhat = v.data[j] / c2;
                p.data[j] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
