//! First-order optimizers operating on a [`ParamStore`]'s accumulated
//! gradients.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::scalar::Scalar;

pub trait Optimizer<T: Scalar> {
    fn step(&mut self, store: &mut ParamStore<T>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

pub struct Sgd<T> {
    cfg: SgdConfig,
    velocity: Vec<Array2<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(cfg: SgdConfig, store: &ParamStore<T>) -> Self {
        let velocity = store.ids().map(|id| Array2::zeros(store.value(id).dim())).collect();
        Self { cfg, velocity }
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn step(&mut self, store: &mut ParamStore<T>) {
        let lr = T::of(self.cfg.lr);
        let mu = T::of(self.cfg.momentum);
        let wd = T::of(self.cfg.weight_decay);
        let ids: Vec<_> = store.trainable().collect();
        for id in ids {
            let grad = store.grad(id).clone();
            let vel = &mut self.velocity[id.0];
            let value = store.value_mut(id);
            Zip::from(value).and(vel).and(&grad).for_each(|w, v, &g| {
                let g = g + wd * *w;
                *v = mu * *v + g;
                *w -= lr * *v;
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    0.01
}

pub struct AdamW<T> {
    cfg: AdamWConfig,
    t: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(cfg: AdamWConfig, store: &ParamStore<T>) -> Self {
        let zeros = || store.ids().map(|id| Array2::zeros(store.value(id).dim())).collect();
        Self {
            cfg,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

impl<T: Scalar> Optimizer<T> for AdamW<T> {
    fn step(&mut self, store: &mut ParamStore<T>) {
        self.t += 1;
        let c = &self.cfg;
        let lr = T::of(c.lr);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let eps = T::of(c.eps);
        let wd = T::of(c.weight_decay);
        let bc1 = T::one() - b1.powi(self.t);
        let bc2 = T::one() - b2.powi(self.t);
        let ids: Vec<_> = store.trainable().collect();
        for id in ids {
            let grad = store.grad(id).clone();
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let value = store.value_mut(id);
            Zip::from(value).and(m).and(v).and(&grad).for_each(|w, m, v, &g| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *w -= lr * (mhat / (vhat.sqrt() + eps) + wd * *w);
            });
        }
    }
}
