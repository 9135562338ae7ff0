use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{Gradients, ParamStore};
use crate::error::{GapError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Number of completed steps.
    pub t: u64,
    pub(crate) first: Vec<Matrix>,
    pub(crate) second: Vec<Matrix>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let shapes: Vec<_> = store.iter().map(|(_, p)| p.value.shape()).collect();
        AdamState {
            config,
            t: 0,
            first: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn moments(&self) -> (&[Matrix], &[Matrix]) {
        (&self.first, &self.second)
    }

    pub(crate) fn from_parts(
        config: AdamConfig,
        t: u64,
        first: Vec<Matrix>,
        second: Vec<Matrix>,
    ) -> Self {
        AdamState {
            config,
            t,
            first,
            second,
        }
    }

    /// Applies one update to every trainable parameter that has a gradient.
    /// All gradients are validated before any parameter moves.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if self.first.len() != store.len() {
            return Err(GapError::shape(
                "adam_step",
                format!(
                    "optimizer tracks {} parameters, store has {}",
                    self.first.len(),
                    store.len()
                ),
            ));
        }
        for (id, g) in grads.iter() {
            let p = store.get(id);
            if g.shape() != p.value.shape() {
                return Err(GapError::shape(
                    "adam_step",
                    format!("gradient for `{}` has wrong shape", p.name),
                ));
            }
            if !g.is_finite() {
                return Err(GapError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (id, g) in grads.iter() {
            if !store.get(id).trainable {
                continue;
            }
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            let w = store.value_mut(id);
            for (((w, m), v), &g) in w
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
