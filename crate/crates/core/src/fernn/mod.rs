//! Formula-extractable recurrent networks.
//!
//! A [`ModelSpec`] is a DAG of cells. Atom cells compute affine predicates of
//! the (normalized) signal, operator cells compute the robust semantics of
//! `!`, `&`, `|`, `F`, `G`, `S` with min/max activations and one memory unit
//! for the temporal ones, and choice blocks pick one input through a one-hot
//! `+-1` quantized weight vector. Because every cell is a formula operator,
//! the trained graph reads back as a formula ([`extract_formula`]).

mod build;
mod checkpoint;
mod extract;
mod forward;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, ParamId, ParamStore, WindowKind};
use crate::stl::{StlError, Trace};

pub use build::{
    build_fixed_length, build_interval, build_up_to_length, from_formula, BuildOptions,
    MAX_LENGTH,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use extract::{extract_formula, extract_nnf};
pub use forward::{forward_model, forward_value, interval_cell_forward, ModelTape};

/// Default drop magnitude `M` of interval cells.
pub const DEFAULT_DROP_MAGNITUDE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalKind {
    Once,
    Hist,
}

impl IntervalKind {
    pub(crate) fn window(self) -> WindowKind {
        match self {
            IntervalKind::Once => WindowKind::Max,
            IntervalKind::Hist => WindowKind::Min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    /// `sum_k w_k x[features_k] + b`
    Atom {
        features: Vec<usize>,
        weights: Vec<ParamId>,
        bias: ParamId,
    },
    Not(CellId),
    And(CellId, CellId),
    Or(CellId, CellId),
    Once(CellId),
    Hist(CellId),
    Since(CellId, CellId),
    Choice {
        inputs: Vec<CellId>,
        weights: Vec<ParamId>,
    },
    /// Bounded Once/Hist over offsets `0..=weights.len()-1`; a step is in
    /// the interval when its weight is non-negative.
    Interval {
        kind: IntervalKind,
        input: CellId,
        weights: Vec<ParamId>,
        magnitude: f64,
        /// fixed slot holding the non-negativity shift of the input
        shift: ParamId,
    },
}

impl Cell {
    pub fn inputs(&self) -> Vec<CellId> {
        match self {
            Cell::Atom { .. } => Vec::new(),
            Cell::Not(a) | Cell::Once(a) | Cell::Hist(a) => vec![*a],
            Cell::Interval { input, .. } => vec![*input],
            Cell::And(a, b) | Cell::Or(a, b) | Cell::Since(a, b) => vec![*a, *b],
            Cell::Choice { inputs, .. } => inputs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// squashes the output into (-1, 1) for `+-1` labels
    Tanh,
    Identity,
}

/// Per-feature min/max of the training split; signals are mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    pub fn fit<'a>(traces: impl IntoIterator<Item = &'a Trace>, dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for tr in traces {
            for row in tr.rows() {
                for k in 0..dim {
                    min[k] = min[k].min(row[k]);
                    max[k] = max[k].max(row[k]);
                }
            }
        }
        for k in 0..dim {
            if !min[k].is_finite() {
                min[k] = 0.0;
                max[k] = 1.0;
            }
        }
        Normalization { min, max }
    }

    /// `1 / (max - min)`, or 1 for a constant feature.
    pub fn scale(&self, k: usize) -> f64 {
        let range = self.max[k] - self.min[k];
        if range > 0.0 {
            1.0 / range
        } else {
            1.0
        }
    }

    pub fn apply(&self, tr: &Trace) -> Trace {
        tr.map_values(|k, v| (v - self.min[k]) * self.scale(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub cells: Vec<Cell>,
    pub output: CellId,
    pub head: Head,
    pub params: ParamStore,
    pub normalization: Option<Normalization>,
}

impl ModelSpec {
    /// Checks that cells only reference earlier cells, parameters exist, and
    /// atoms read valid features.
    pub fn validate(&self) -> Result<(), FernnError> {
        let bad = |msg: String| Err(FernnError::Invalid(msg));
        if self.output.index() >= self.cells.len() {
            return bad("output cell does not exist".into());
        }
        let np = self.params.len();
        let param_ok = |p: &ParamId| p.index() < np;
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.inputs().iter().any(|c| c.index() >= i) {
                return bad(format!("cell {i} reads a later cell"));
            }
            match cell {
                Cell::Atom {
                    features,
                    weights,
                    bias,
                } => {
                    if features.len() != weights.len() || features.iter().any(|k| *k >= self.dim) {
                        return bad(format!("atom cell {i} has bad features"));
                    }
                    if !weights.iter().all(param_ok) || !param_ok(bias) {
                        return bad(format!("atom cell {i} has unknown parameters"));
                    }
                }
                Cell::Choice { inputs, weights } => {
                    if inputs.is_empty() || inputs.len() != weights.len() || !weights.iter().all(param_ok) {
                        return bad(format!("choice cell {i} is malformed"));
                    }
                }
                Cell::Interval {
                    weights,
                    magnitude,
                    shift,
                    ..
                }
                    if (weights.is_empty() || !weights.iter().all(param_ok) || !param_ok(shift) || *magnitude <= 0.0) => {
                        return bad(format!("interval cell {i} is malformed"));
                    }
                _ => {}
            }
        }
        if self.normalization.as_ref().is_some_and(|n| n.min.len() != self.dim || n.max.len() != self.dim) {
            return bad("normalization record has the wrong dimension".into());
        }
        Ok(())
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.index()]
    }

    /// Cells reachable from the output.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![self.output];
        while let Some(c) = stack.pop() {
            if !std::mem::replace(&mut seen[c.index()], true) {
                stack.extend(self.cells[c.index()].inputs());
            }
        }
        seen
    }

    pub fn choice_blocks(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Choice { .. })).count()
    }

    /// Number of input selections the choice blocks can make jointly:
    /// the product of their fan-ins (`2^N` for `N` two-input blocks).
    /// Each selection can additionally be negated by a `-1` weight.
    pub fn embedded_structures(&self) -> u128 {
        self.cells
            .iter()
            .filter_map(|c| match c {
                Cell::Choice { inputs, .. } => Some(inputs.len() as u128),
                _ => None,
            })
            .fold(1u128, |acc, k| acc.saturating_mul(k))
    }

    pub fn interval_cells(&self) -> impl Iterator<Item = (CellId, &Cell)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Cell::Interval { .. }))
            .map(|(i, c)| (CellId(i as u32), c))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FernnError {
    #[error("unsupported formula length {0} (supported: 2..={MAX_LENGTH})")]
    UnsupportedLength(usize),
    #[error("model expects {expected} features, trace has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("window input {0} is negative and no shift record is present")]
    NegativeWindowInput(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot hardwire formula: {0}")]
    Unsupported(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
