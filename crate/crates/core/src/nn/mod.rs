//! One-hidden-layer dense networks with a softmax (fine) or sigmoid (coarse)
//! head, trained by mini-batch gradient descent.

mod backward;
mod model;
mod optim;
mod train;

pub use backward::Gradients;
pub use model::{
    glorot_init, match_capacity, sigmoid, softmax_in_place, Activation, ForwardTrace, Head,
    MlpModel,
};
pub use optim::{Adam, Optimizer, OptimizerFactory, OptimizerRegistry, Sgd};
pub use train::{train, train_with, EpochStats, TrainConfig, TrainingLog};
