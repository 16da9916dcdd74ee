use serde::{Deserialize, Serialize};

use crate::data::{subsample_indices, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::{LossKind, ObjectiveRegistry};
use crate::metrics::coarse_accuracy;
use crate::nn::{train_with, Activation, Head, MlpModel, OptimizerRegistry, TrainConfig};
use crate::seed;

const SUBSAMPLE_STREAM: u64 = 1;
const FINE_INIT_STREAM: u64 = 2;
const COARSE_INIT_STREAM: u64 = 3;
const TRAIN_STREAM: u64 = 4;

/// The strategy registries a run resolves its objective and optimizer from.
pub struct Registries {
    pub objectives: ObjectiveRegistry,
    pub optimizers: OptimizerRegistry,
}

impl Registries {
    pub fn builtin() -> Self {
        Registries {
            objectives: ObjectiveRegistry::builtin(),
            optimizers: OptimizerRegistry::builtin(),
        }
    }
}

impl Default for Registries {
    fn default() -> Self {
        Registries::builtin()
    }
}

/// Everything that defines one fine-versus-coarse comparison apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub train_size: usize,
    pub fine_hidden: usize,
    pub coarse_hidden: usize,
    pub activation: Activation,
    pub fine_loss: LossKind,
    /// Batch size already resolved.
    pub train: TrainConfig,
    pub stratified: bool,
}

/// Outcome of one paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub train_size: usize,
    pub acc_fine_test: f64,
    pub acc_coarse_test: f64,
    pub acc_fine_train: f64,
    pub acc_coarse_train: f64,
    /// Monitored loss at the restored epoch.
    pub loss_fine: f64,
    pub loss_coarse: f64,
    pub epochs_fine: usize,
    pub epochs_coarse: usize,
    pub n_fine: usize,
    pub n_coarse: usize,
    /// FNV-1a digest of the training indices, identical for both models.
    pub train_digest: String,
}

impl RunRecord {
    pub fn delta(&self) -> f64 {
        self.acc_fine_test - self.acc_coarse_test
    }

    pub fn n_over_p(&self) -> f64 {
        self.n_fine as f64 / self.train_size as f64
    }
}

fn digest(indices: &[usize]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &i in indices {
        for b in (i as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn accuracy(model: &MlpModel, data: &LabeledDataset) -> Result<f64> {
    let pred = model.predict_coarse(data.features(), data.hierarchy())?;
    coarse_accuracy(&pred, &data.coarse_labels())
}

/// Trains a softmax model on the fine labels and a sigmoid model on the
/// coarse labels, on the same seeded subsample of `pool`, and scores both on
/// the coarse task.
///
/// Both models share the training seed (validation split and batch order)
/// but draw their initial weights from separate streams.
pub fn run_comparison(
    registries: &Registries,
    pool: &LabeledDataset,
    test: &LabeledDataset,
    point: &RunPoint,
    seed_: u64,
) -> Result<RunRecord> {
    let ctx = |e: Error| e.with_context(format!("run with seed {seed_}"));
    if point.train_size > pool.len() {
        return Err(Error::domain(format!(
            "train size {} exceeds the {} available samples",
            point.train_size,
            pool.len()
        )));
    }
    if test.dim() != pool.dim() || test.k() != pool.k() {
        return Err(Error::shape("test set does not match the training data"));
    }
    let indices = subsample_indices(
        pool,
        point.train_size,
        seed::derive(seed_, SUBSAMPLE_STREAM),
        point.stratified,
    )?;
    let train = pool.select(&indices);
    let cfg = TrainConfig {
        seed: seed::derive(seed_, TRAIN_STREAM),
        ..point.train.clone()
    };
    let d = train.dim();

    let fine_obj = registries.objectives.build(&point.fine_loss)?;
    let fine = MlpModel::glorot(
        d,
        point.fine_hidden,
        Head::FineSoftmax { k: train.k() },
        point.activation,
        seed::derive(seed_, FINE_INIT_STREAM),
    )?;
    let (fine, fine_log) = train_with(
        &registries.optimizers,
        fine,
        &train,
        &cfg,
        fine_obj.as_ref(),
    )
    .map_err(ctx)?;

    let coarse_obj = registries.objectives.build(&LossKind::Coarse)?;
    let coarse = MlpModel::glorot(
        d,
        point.coarse_hidden,
        Head::CoarseSigmoid,
        point.activation,
        seed::derive(seed_, COARSE_INIT_STREAM),
    )?;
    let (coarse, coarse_log) = train_with(
        &registries.optimizers,
        coarse,
        &train,
        &cfg,
        coarse_obj.as_ref(),
    )
    .map_err(ctx)?;

    Ok(RunRecord {
        seed: seed_,
        train_size: train.len(),
        acc_fine_test: accuracy(&fine, test)?,
        acc_coarse_test: accuracy(&coarse, test)?,
        acc_fine_train: accuracy(&fine, &train)?,
        acc_coarse_train: accuracy(&coarse, &train)?,
        loss_fine: fine_log.best_loss,
        loss_coarse: coarse_log.best_loss,
        epochs_fine: fine_log.epochs_run(),
        epochs_coarse: coarse_log.epochs_run(),
        n_fine: fine.param_count(),
        n_coarse: coarse.param_count(),
        train_digest: digest(&indices),
    })
}

/// Registries with an extra `poison` optimizer that writes NaN into every
/// parameter, for exercising failure paths.
#[cfg(test)]
pub(crate) fn poisoned_registries() -> Registries {
    struct Poison;
    impl crate::nn::Optimizer for Poison {
        fn name(&self) -> &'static str {
            "poison"
        }
        fn step(&mut self, model: &mut MlpModel, _: &crate::nn::Gradients, _: f64) {
            for p in model.param_slices_mut() {
                p.fill(f64::NAN);
            }
        }
    }
    let mut r = Registries::builtin();
    r.optimizers.register("poison", |_, _| Box::new(Poison));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Hierarchy;
    use crate::matrix::Matrix;

    /// Coarse class decided by the sign of x0, fine class by the sign of x1.
    fn quadrants(n: usize, offset: f64) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let a = (i as f64 + offset) * 2.399963;
            let (s0, s1) = (i % 2 == 0, (i / 2) % 2 == 0);
            let x0 = if s0 { 0.6 } else { -0.6 } + 0.2 * a.cos();
            let x1 = if s1 { 0.6 } else { -0.6 } + 0.2 * a.sin();
            rows.push(vec![x0, x1]);
            labels.push(2 * usize::from(!s0) + usize::from(!s1));
        }
        LabeledDataset::new(
            "quadrants",
            Matrix::from_rows(&rows).unwrap(),
            labels,
            Hierarchy::split_at(4, 2).unwrap(),
            (0..4).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    fn point(train_size: usize) -> RunPoint {
        RunPoint {
            train_size,
            fine_hidden: 6,
            coarse_hidden: 8,
            activation: Activation::Tanh,
            fine_loss: LossKind::Fine,
            train: TrainConfig {
                max_epochs: 150,
                batch_size: 8,
                early_stop_patience: 0,
                ..TrainConfig::adam()
            },
            stratified: true,
        }
    }

    #[test]
    fn separable_task_is_solved_by_both_models() {
        let pool = quadrants(200, 0.0);
        let test = quadrants(100, 0.5);
        let r = run_comparison(&Registries::builtin(), &pool, &test, &point(120), 7).unwrap();
        assert_eq!(r.acc_fine_test, 1.0);
        assert_eq!(r.acc_coarse_test, 1.0);
        assert_eq!(r.delta(), 0.0);
        assert_eq!(r.train_size, 120);
        assert_eq!(r.n_fine, 6 * 3 + 4 * 7);
        assert_eq!(r.n_coarse, 8 * 3 + 9);
    }

    #[test]
    fn runs_are_reproducible_and_seed_dependent() {
        let pool = quadrants(200, 0.0);
        let test = quadrants(60, 0.5);
        let mut p = point(40);
        p.train.max_epochs = 5;
        let reg = Registries::builtin();
        let a = run_comparison(&reg, &pool, &test, &p, 3).unwrap();
        let b = run_comparison(&reg, &pool, &test, &p, 3).unwrap();
        let c = run_comparison(&reg, &pool, &test, &p, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train_digest, c.train_digest);
    }

    #[test]
    fn oversized_train_request_is_a_domain_error() {
        let pool = quadrants(20, 0.0);
        let err = run_comparison(&Registries::builtin(), &pool, &pool, &point(21), 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn divergence_carries_run_context() {
        let pool = quadrants(40, 0.0);
        let mut p = point(40);
        p.train.optimizer = "poison".into();
        let err = run_comparison(&poisoned_registries(), &pool, &pool, &p, 9).unwrap_err();
        assert!(err.to_string().contains("seed 9"), "{err}");
        assert!(matches!(err.root(), Error::Divergence { .. }));
    }
}
