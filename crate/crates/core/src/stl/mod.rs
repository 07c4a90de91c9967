//! Past-time STL: formula syntax, text grammar, and a reference monitor.

mod formula;
mod monitor;
mod syntax;
mod trace;

pub use formula::{Atom, Formula, IntervalMask};
pub use monitor::{
    boolean_eval, boolean_signal, final_robustness, robustness, robustness_recurrent,
    robustness_recurrent_with, robustness_with, sign, MonitorConfig, DEFAULT_INFINITY,
};
pub use syntax::{format, format_with_features, parse, parse_with_features};
pub use trace::Trace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StlError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown feature '{name}' at position {pos}")]
    UnknownFeature { name: String, pos: usize },
    #[error("malformed mask: {0}")]
    MalformedMask(String),
    #[error("dimension mismatch: trace has {expected} features, atom has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("recurrent evaluation needs unbounded temporal operators")]
    BoundedMask,
    #[error("trace must have at least one step and one feature")]
    EmptyTrace,
    #[error("time {t} is outside a trace of length {len}")]
    TimeOutOfRange { t: usize, len: usize },
}
