//! A small reverse-mode differentiation engine over dense row-major matrices.
//!
//! Only the operations the auto-encoder needs are provided. A [`Tape`]
//! records one forward pass; [`Tape::backward`] walks it in reverse.

mod gradcheck;
mod init;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{
    analytic_gradients, compare_gradients, grad_check, numeric_gradients, op_gradient_checks, GradCheckOptions,
    GradCheckReport,
};
pub use init::xavier_init;
pub use params::{AdamConfig, ParamGrads, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor2;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{0} of an empty tensor")]
    Empty(&'static str),
    #[error("backward needs a 1x1 output, got {0}x{1}")]
    NonScalar(usize, usize),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("corrupt parameter data: {0}")]
    Corrupt(String),
}

pub(crate) fn shape_err(op: &'static str, detail: String) -> AutodiffError {
    AutodiffError::Shape { op, detail }
}
