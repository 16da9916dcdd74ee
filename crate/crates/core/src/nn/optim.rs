use std::collections::BTreeMap;

use super::{Gradients, MlpModel, TrainConfig};
use crate::error::{Error, Result};

/// A parameter update rule. The learning rate for the current epoch is
/// supplied by the training loop's schedule.
pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64);
}

/// Plain stochastic gradient descent.
#[derive(Debug, Clone, Default)]
pub struct Sgd;

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        for (p, g) in model.param_slices_mut().into_iter().zip(grads.slices()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= lr * gi;
            }
        }
    }
}

/// Adam with the bias correction folded into the step size and `ε` added
/// to `√v̂` (the Keras formulation, where ε = 1e-7 is the default).
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64, n_params: usize) -> Self {
        Adam {
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let lr_t = lr * (1.0 - self.beta2.powi(self.t)).sqrt() / (1.0 - self.beta1.powi(self.t));
        let mut k = 0;
        for (p, g) in model.param_slices_mut().into_iter().zip(grads.slices()) {
            for (pi, &gi) in p.iter_mut().zip(g) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                *pi -= lr_t * *m / (v.sqrt() + self.epsilon);
                k += 1;
            }
        }
    }
}

/// Builds an optimizer for a model with `n_params` parameters.
pub type OptimizerFactory = fn(&TrainConfig, usize) -> Box<dyn Optimizer>;

/// Optimizers registered by name; [`TrainConfig::optimizer`] selects one.
#[derive(Clone)]
pub struct OptimizerRegistry {
    factories: BTreeMap<String, OptimizerFactory>,
}

impl OptimizerRegistry {
    pub fn empty() -> Self {
        OptimizerRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("sgd", |_, _| Box::new(Sgd));
        r.register("adam", |cfg, n| {
            Box::new(Adam::new(
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_epsilon,
                n,
            ))
        });
        r
    }

    pub fn register(&mut self, name: impl Into<String>, factory: OptimizerFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, cfg: &TrainConfig, n_params: usize) -> Result<Box<dyn Optimizer>> {
        let factory = self.factories.get(&cfg.optimizer).ok_or_else(|| {
            Error::config(format!(
                "unknown optimizer '{}' (known: {})",
                cfg.optimizer,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Ok(factory(cfg, n_params))
    }
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
