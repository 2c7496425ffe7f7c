//! Model parameters, tape-based gradients, and SGD training loops.

pub mod gradcheck;
pub mod graph;
pub mod params;
pub mod sgd;
pub mod tape;

pub use gradcheck::{check_gradients, check_gradients_with_fault, GradCheckReport};
pub use graph::{classifier_loss_grad, cross_entropy_of, group_loss_grad, tape_logits, LossGrad};
pub use params::ModelParams;
pub use sgd::{
    train_classifier, train_classifier_from, train_group_model, EpochStats, GroupTrainReport,
    SgdConfig, TrainReport,
};
pub use tape::{Adjoints, NodeId, SymFnKind, Tape, EIG_GAP_GUARD};
