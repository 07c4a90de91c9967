use crate::autodiff::{quantize_choice, window_keep};
use crate::stl::{Atom, Formula, IntervalMask};

use super::{Cell, CellId, FernnError, ModelSpec};

/// Reads the formula a (quantized) model computes.
///
/// Each choice block contributes its selected input, wrapped in `!` when the
/// selected weight is negative. Atom coefficients are mapped back to raw
/// signal units through the normalization record, and interval cells become
/// masks over their kept offsets. The positive scale `alpha` of each choice
/// block is dropped, which changes robustness magnitudes but not signs.
pub fn extract_formula(m: &ModelSpec) -> Result<Formula, FernnError> {
    m.validate()?;
    go(m, m.output)
}

/// [`extract_formula`] with negations pushed onto atoms.
pub fn extract_nnf(m: &ModelSpec) -> Result<Formula, FernnError> {
    Ok(extract_formula(m)?.negation_normal_form())
}

fn go(m: &ModelSpec, id: CellId) -> Result<Formula, FernnError> {
    let p = |q: &crate::autodiff::ParamId| m.params.get(*q);
    Ok(match m.cell(id) {
        Cell::Atom {
            features,
            weights,
            bias,
        } => {
            let mut w = vec![0.0; m.dim];
            let mut b = p(bias);
            for (k, wp) in features.iter().zip(weights) {
                let wk = p(wp);
                match &m.normalization {
                    Some(n) => {
                        let s = n.scale(*k);
                        w[*k] += wk * s;
                        b -= wk * s * n.min[*k];
                    }
                    None => w[*k] += wk,
                }
            }
            Formula::atom(Atom::new(w, b))
        }
        Cell::Not(a) => Formula::not(go(m, *a)?),
        Cell::And(a, b) => Formula::and(go(m, *a)?, go(m, *b)?),
        Cell::Or(a, b) => Formula::or(go(m, *a)?, go(m, *b)?),
        Cell::Once(a) => Formula::once(IntervalMask::Unbounded, go(m, *a)?),
        Cell::Hist(a) => Formula::hist(IntervalMask::Unbounded, go(m, *a)?),
        Cell::Since(a, b) => Formula::since(IntervalMask::Unbounded, go(m, *a)?, go(m, *b)?),
        Cell::Choice { inputs, weights } => {
            let w: Vec<f64> = weights.iter().map(p).collect();
            let q = quantize_choice(&w)?;
            let chosen = go(m, inputs[q.index])?;
            if q.sign < 0.0 {
                Formula::not(chosen)
            } else {
                chosen
            }
        }
        Cell::Interval {
            kind,
            input,
            weights,
            ..
        } => {
            let w: Vec<f64> = weights.iter().map(p).collect();
            let keep = window_keep(&w);
            let mask = IntervalMask::steps(keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i))?;
            let child = go(m, *input)?;
            match kind {
                super::IntervalKind::Once => Formula::once(mask, child),
                super::IntervalKind::Hist => Formula::hist(mask, child),
            }
        }
    })
}
