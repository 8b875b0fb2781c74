//! Training and evaluation: objective, optimizer, loop, metrics.
//!
//! Gradients come from the network graph in [`crate::nn::graph`]: one node
//! per module-level op, each with a hand-written adjoint.

mod eval;
mod metrics;
mod optim;
mod run;

pub use eval::{evaluate, evaluate_mvdr, evaluate_with, separate_clip, ClipScore, EvalReport};
pub use metrics::{loss, loss_grad, sdr, si_sdr, si_sdr_grad, LossValue, LossWeights, DB_CLAMP};
pub use optim::{adam_step, grad_norm, AdamConfig, AdamState};
pub use run::{
    clip_gradient, epoch_order, train, TrainConfig, TrainOutcome, BEST_CHECKPOINT, LAST_CHECKPOINT, LAST_OPTIMIZER,
    TRAIN_LOG,
};
