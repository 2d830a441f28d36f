//! Flow-sensitive graph neural network with hand-written gradients.

pub mod adam;
pub mod compose;
pub mod graph;
pub mod layer;
pub mod loss;
pub mod model;
pub mod relations;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use compose::{compose, compose_backward, CompositionOp};
pub use graph::{Augmentation, GraphInput, SyntheticNode};
pub use layer::{
    layer_backward, layer_forward, Activation, LayerParams, LayerSettings, LayerTrace,
};
pub use loss::{cross_entropy, cross_entropy_grad};
pub use model::{
    predictions, softmax_rows, ForwardTrace, Model, ModelConfig, ParamSet, Resample, NUM_CLASSES,
};
pub use relations::{Direction, Relation, NUM_RELATIONS};

use crate::persist::PersistError;

#[derive(Debug, thiserror::Error)]
pub enum FsgnnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in layer output")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("malformed model file: {0}")]
    Format(String),
}
