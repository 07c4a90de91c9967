//! Inference of past-time Signal Temporal Logic formulas with
//! formula-extractable recurrent networks.
//!
//! The pieces, bottom-up:
//!
//! - [`stl`]: formulas, their text grammar, and a robustness monitor.
//! - [`autodiff`]: a scalar reverse-mode tape with a one-hot quantized choice node.
//! - [`fernn`]: operator cells, choice blocks, architecture builders, and formula extraction.
//! - [`train`]: Adam, the training loop with early stopping, and misclassification rate.
//! - [`data`]: CSV traces and synthetic generators.
//! - [`enumerate`]: an exhaustive structure + threshold grid search used as a baseline.

pub mod autodiff;
pub mod data;
pub mod enumerate;
pub mod fernn;
pub mod stl;
pub mod train;

pub use data::{Dataset, LabelKind};
pub use fernn::ModelSpec;
pub use stl::{Atom, Formula, IntervalMask, Trace};
