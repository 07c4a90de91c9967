//! Scalar reverse-mode differentiation over an explicit tape.
//!
//! The node set is exactly what the network cells need: arithmetic,
//! `min`/`max`, `tanh`, affine atoms, quantized choice blocks, and weighted
//! windows for bounded temporal operators.

mod params;
mod quantize;
mod tape;

pub use params::ParamStore;
pub use quantize::{quantization_error, quantize_choice, Quantized};
pub use tape::{window_keep, NodeId, ParamId, Tape, WindowKind};
pub(crate) use tape::window_eval;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AutodiffError {
    #[error("choice needs at least one input")]
    EmptyChoice,
    #[error("length mismatch: {inputs} inputs for {weights} weights")]
    LengthMismatch { inputs: usize, weights: usize },
    #[error("weights must be finite")]
    NonFinite,
    #[error("backward called before forward")]
    NotEvaluated,
    #[error("node is not on this tape")]
    UnknownNode,
}
