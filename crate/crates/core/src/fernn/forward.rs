use crate::autodiff::{window_eval, window_keep, NodeId, Tape};
use crate::stl::Trace;

use super::{Cell, FernnError, Head, IntervalKind, ModelSpec};

/// A model unrolled over one trace.
///
/// The tape only depends on the model structure and the trace, so it can be
/// re-run with fresh parameters every epoch.
#[derive(Debug, Clone)]
pub struct ModelTape {
    pub tape: Tape,
    /// head output at the last step
    pub output: NodeId,
    /// output cell before the head, at the last step
    pub raw_output: NodeId,
    /// for every interval cell: (cell index, its input node at every step)
    pub window_inputs: Vec<(usize, Vec<NodeId>)>,
}

impl ModelTape {
    /// Unrolls `m` over `tr`. The trace is normalized with the model's
    /// record when one is present.
    pub fn build(m: &ModelSpec, tr: &Trace) -> Result<Self, FernnError> {
        if tr.dim() != m.dim {
            return Err(FernnError::DimensionMismatch {
                expected: m.dim,
                found: tr.dim(),
            });
        }
        let normalized;
        let tr = match &m.normalization {
            Some(n) => {
                normalized = n.apply(tr);
                &normalized
            }
            None => tr,
        };
        let live = m.reachable();
        let mut tape = Tape::new(m.params.values());
        let steps = tr.len();
        let mut nodes: Vec<Vec<NodeId>> = vec![Vec::with_capacity(steps); m.cells.len()];
        let mut xs = Vec::new();
        let mut ins = Vec::new();
        for t in 0..steps {
            let row = tr.row(t);
            for (c, cell) in m.cells.iter().enumerate() {
                if !live[c] {
                    continue;
                }
                let at = |id: super::CellId, s: usize| nodes[id.index()][s];
                let node = match cell {
                    Cell::Atom {
                        features,
                        weights,
                        bias,
                    } => {
                        xs.clear();
                        xs.extend(features.iter().map(|k| row[*k]));
                        tape.affine(weights, *bias, &xs)?
                    }
                    Cell::Not(a) => tape.neg(at(*a, t)),
                    Cell::And(a, b) => tape.min2(at(*a, t), at(*b, t)),
                    Cell::Or(a, b) => tape.max2(at(*a, t), at(*b, t)),
                    Cell::Once(a) if t == 0 => at(*a, 0),
                    Cell::Once(a) => tape.max2(at(*a, t), nodes[c][t - 1]),
                    Cell::Hist(a) if t == 0 => at(*a, 0),
                    Cell::Hist(a) => tape.min2(at(*a, t), nodes[c][t - 1]),
                    // memory starts at -H, so max(memory, psi[0]) = psi[0]
                    Cell::Since(a, b) if t == 0 => tape.min2(at(*a, 0), at(*b, 0)),
                    Cell::Since(a, b) => {
                        let mem = tape.max2(nodes[c][t - 1], at(*b, t));
                        tape.min2(at(*a, t), mem)
                    }
                    Cell::Choice { inputs, weights } => {
                        ins.clear();
                        ins.extend(inputs.iter().map(|i| at(*i, t)));
                        tape.choice(&ins, weights)?
                    }
                    Cell::Interval {
                        kind,
                        input,
                        weights,
                        magnitude,
                        shift,
                    } => {
                        let reach = (weights.len() - 1).min(t);
                        ins.clear();
                        ins.extend((0..=reach).map(|k| at(*input, t - k)));
                        tape.window(kind.window(), &ins, weights, *magnitude, *shift)?
                    }
                };
                nodes[c].push(node);
            }
        }
        let raw_output = *nodes[m.output.index()].last().expect("trace is non-empty");
        let output = match m.head {
            Head::Tanh => tape.tanh(raw_output),
            Head::Identity => raw_output,
        };
        let window_inputs = m
            .cells
            .iter()
            .enumerate()
            .filter_map(|(c, cell)| match cell {
                Cell::Interval { input, .. } if live[c] => Some((c, nodes[input.index()].clone())),
                _ => None,
            })
            .collect();
        Ok(ModelTape {
            tape,
            output,
            raw_output,
            window_inputs,
        })
    }

    pub fn forward(&mut self) -> f64 {
        self.tape.forward();
        self.tape.value(self.output)
    }
}

/// Runs the model over a trace: quantized choices, recurrent cells unrolled
/// over every step, head applied to the output cell at the last step.
pub fn forward_model(m: &ModelSpec, tr: &Trace) -> Result<(f64, ModelTape), FernnError> {
    let mut mt = ModelTape::build(m, tr)?;
    let v = mt.forward();
    Ok((v, mt))
}

pub fn forward_value(m: &ModelSpec, tr: &Trace) -> Result<f64, FernnError> {
    Ok(forward_model(m, tr)?.0)
}

/// Bounded Once/Hist cell on its own.
///
/// `inputs[i]` is the input robustness `i` steps in the past. A step is kept
/// when `weights[i] >= 0` (or, if every weight is negative, the largest one
/// is kept). Once returns `max_i q_i r[i]` with `q_i` in `{1, -M}`, Hist
/// returns `min_i q_i r[i]` with `q_i` in `{1, +M}`. Inputs must be
/// non-negative unless a `shift` is supplied, which is added before and
/// subtracted after the extremum.
pub fn interval_cell_forward(
    kind: IntervalKind,
    inputs: &[f64],
    weights: &[f64],
    magnitude: f64,
    shift: Option<f64>,
) -> Result<f64, FernnError> {
    if inputs.is_empty() || inputs.len() > weights.len() {
        return Err(FernnError::Invalid(format!(
            "{} window inputs for {} weights",
            inputs.len(),
            weights.len()
        )));
    }
    if magnitude <= 0.0 {
        return Err(FernnError::Invalid("drop magnitude must be positive".into()));
    }
    if shift.is_none() {
        if let Some(r) = inputs.iter().find(|r| **r < 0.0) {
            return Err(FernnError::NegativeWindowInput(*r));
        }
    }
    let keep = window_keep(weights);
    let out = window_eval(
        kind.window(),
        inputs.iter().copied(),
        |i| keep[i],
        magnitude,
        shift.unwrap_or(0.0),
    );
    Ok(out.value)
}
