use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{MlpModel, OptimizerRegistry};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::{Hierarchy, Objective};
use crate::matrix::Matrix;
use crate::metrics::coarse_accuracy;
use crate::seed;

const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// Optimization hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Registry name of the optimizer (`sgd` or `adam` by default).
    pub optimizer: String,
    /// Learning rate at the first epoch; decays linearly to `lr_end` at
    /// epoch `max_epochs - 1`.
    pub lr_start: f64,
    pub lr_end: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Epochs without validation improvement before stopping; 0 disables
    /// stopping (the best epoch is still restored).
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// SGD with the learning rate decaying from 0.01 to 0.001.
    fn default() -> Self {
        TrainConfig {
            optimizer: "sgd".into(),
            lr_start: 0.01,
            lr_end: 0.001,
            max_epochs: 500,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            early_stop_patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Adam at a constant learning rate of 0.001.
    pub fn adam() -> Self {
        TrainConfig {
            optimizer: "adam".into(),
            lr_start: 0.001,
            lr_end: 0.001,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return fail(format!(
                "learning rates must be positive (got {} -> {})",
                self.lr_start, self.lr_end
            ));
        }
        if self.lr_end > self.lr_start {
            return fail(format!(
                "lr_end ({}) must not exceed lr_start ({})",
                self.lr_end, self.lr_start
            ));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return fail("max_epochs and batch_size must be positive".into());
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return fail(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return fail(format!(
                "validation_fraction must lie in [0, 0.5), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }

    /// Linearly interpolated learning rate for a zero-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.max_epochs <= 1 {
            return self.lr_start;
        }
        let frac = epoch.min(self.max_epochs - 1) as f64 / (self.max_epochs - 1) as f64;
        self.lr_start + (self.lr_end - self.lr_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: Option<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    /// Monitored loss (validation, or training when no validation split
    /// exists) at `best_epoch`.
    pub best_loss: f64,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }
}

struct Split {
    x: Matrix,
    targets: Vec<usize>,
    coarse: Vec<u8>,
}

impl Split {
    fn new(data: &LabeledDataset, idx: &[usize]) -> Self {
        let targets: Vec<usize> = idx.iter().map(|&i| data.fine_labels()[i]).collect();
        let coarse = targets
            .iter()
            .map(|&t| data.hierarchy().coarse_label(t))
            .collect();
        Split {
            x: data.features().select_rows(idx),
            targets,
            coarse,
        }
    }

    fn evaluate(
        &self,
        model: &MlpModel,
        objective: &dyn Objective,
        h: &Hierarchy,
    ) -> Result<(f64, f64)> {
        let trace = model.forward(&self.x)?;
        let loss = model.batch_loss(&trace, &self.targets, objective, h)?;
        let pred = match model.head() {
            super::Head::CoarseSigmoid => trace.outputs.as_slice().to_vec(),
            super::Head::FineSoftmax { .. } => h.aggregate(&trace.outputs)?,
        };
        Ok((loss, coarse_accuracy(&pred, &self.coarse)?))
    }
}

/// Trains with the built-in optimizer registry. See [`train_with`].
pub fn train(
    model: MlpModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    objective: &dyn Objective,
) -> Result<(MlpModel, TrainingLog)> {
    train_with(&OptimizerRegistry::builtin(), model, data, cfg, objective)
}

/// Mini-batch training with per-epoch reshuffling and early stopping.
///
/// A `validation_fraction` share of `data` (seeded draw) is held out; its
/// loss under `objective` is monitored after every epoch and the parameters
/// of the best epoch are returned. Without a validation split the training
/// loss is monitored instead.
pub fn train_with(
    registry: &OptimizerRegistry,
    mut model: MlpModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    objective: &dyn Objective,
) -> Result<(MlpModel, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    let h = data.hierarchy();
    model.check_objective(objective, h)?;
    if data.dim() != model.input_dim() {
        return Err(Error::shape(format!(
            "model expects {} features, dataset has {}",
            model.input_dim(),
            data.dim()
        )));
    }
    let mut optimizer = registry.build(cfg, model.param_count())?;

    let p = data.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut seed::rng(seed::derive(cfg.seed, SPLIT_STREAM)));
    let mut n_val = (cfg.validation_fraction * p as f64).round() as usize;
    if cfg.validation_fraction > 0.0 && p >= 2 {
        n_val = n_val.clamp(1, p - 1);
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_split = Split::new(data, train_idx);
    let val_split = (n_val > 0).then(|| Split::new(data, val_idx));

    let mut shuffle_rng = seed::rng(seed::derive(cfg.seed, SHUFFLE_STREAM));
    let mut batch_order: Vec<usize> = (0..train_idx.len()).collect();
    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate(epoch);
        batch_order.shuffle(&mut shuffle_rng);
        for chunk in batch_order.chunks(cfg.batch_size) {
            let xb = train_split.x.select_rows(chunk);
            let tb: Vec<usize> = chunk.iter().map(|&i| train_split.targets[i]).collect();
            let trace = model.forward(&xb)?;
            let grads = model.backward(&xb, &trace, &tb, objective, h)?;
            optimizer.step(&mut model, &grads, lr);
        }

        // The probability floor would mask NaN outputs, so check the
        // parameters themselves as well as the losses.
        if !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        let (train_loss, train_accuracy) = train_split.evaluate(&model, objective, h)?;
        let val = val_split
            .as_ref()
            .map(|s| s.evaluate(&model, objective, h))
            .transpose()?;
        let monitored = val.map_or(train_loss, |(l, _)| l);
        for loss in [train_loss, monitored] {
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
        }
        log.epochs.push(EpochStats {
            epoch,
            lr,
            train_loss,
            train_accuracy,
            validation_loss: val.map(|v| v.0),
            validation_accuracy: val.map(|v| v.1),
        });

        if monitored < log.best_loss {
            log.best_loss = monitored;
            log.best_epoch = epoch;
            best.clone_from(&model);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}
