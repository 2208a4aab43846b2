//! Minimal differentiable numeric layer: tensors, a reverse-mode tape, the
//! recurrent/attention primitives shared by every model, Adam, checkpoints
//! and finite-difference gradient verification.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod nn;
pub mod optim;
pub mod sampling;
pub mod tensor;

pub use checkpoint::{load_checkpoint, load_checkpoint_file, save_checkpoint, save_checkpoint_file};
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_FD_STEP};
pub use graph::{Grads, Graph, Var};
pub use nn::{
    bilstm_encode, lstm_cell, lstm_step, temporal_attention, AttentionSpec, AttentionVars,
    LstmSpec, LstmState, LstmVars,
};
pub use optim::{adam_step, AdamConfig, AdamMoments, ParamStore};
pub use sampling::{categorical, derive_seed, rng_from, softmax_with_temperature};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum SubstrateError {
    #[error("shape mismatch in {context}: {detail}")]
    ShapeMismatch { context: &'static str, detail: String },
    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },
    #[error("empty input to {context}")]
    EmptyInput { context: &'static str },
    #[error("temperature must be positive, got {tau}")]
    InvalidTemperature { tau: f64 },
    #[error("unknown parameter {name:?}")]
    UnknownParam { name: String },
    #[error("duplicate parameter {name:?}")]
    DuplicateParam { name: String },
    #[error("non-finite gradient for parameter {name:?}")]
    NanGradient { name: String },
    #[error("checkpoint error: {detail}")]
    Checkpoint { detail: String },
}
