//! Dense tensors, reverse-mode gradients, Adam, and the checkpoint container.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use gradcheck::{
    check_gradients, check_gradients_scaled, relative_error, GradCheckReport, ParamCheck, REL_ERROR_FLOOR,
};
pub use graph::{Axis, Gradients, Graph, NodeId};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

pub(crate) use graph::softmax_in_place;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}
