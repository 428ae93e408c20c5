//! Loss, backpropagation, SGD, the training loop and gradient checking.

pub mod backward;
pub mod config;
pub mod gradcheck;
pub mod gradients;
pub mod loss;
pub mod sgd;
pub mod trainer;

pub use backward::backward;
pub use config::{Reduction, TrainConfig};
pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport, TensorCheck};
pub use gradients::Gradients;
pub use loss::{add_l2_gradient, l2_penalty, loss, sample_loss, score_gradient};
pub use sgd::sgd_step;
pub use trainer::{
    batch_gradients, hyper_for, observation_gradients, train, train_from, train_step, Observation, StepLoss, TrainOutputs,
    TrainReport, METRICS_HEADER,
};
