use rayon::prelude::*;

use crate::data::Dataset;
use crate::fernn::{forward_value, ModelSpec, ModelTape};
use crate::stl::{final_robustness, sign, Formula, Trace};

use super::TrainError;

/// Anything that scores a trace; the sign of the score is the prediction.
pub trait Classifier: Sync {
    fn score(&self, tr: &Trace) -> Result<f64, TrainError>;
}

impl Classifier for Formula {
    fn score(&self, tr: &Trace) -> Result<f64, TrainError> {
        Ok(final_robustness(self, tr)?)
    }
}

/// Quantized forward pass.
impl Classifier for ModelSpec {
    fn score(&self, tr: &Trace) -> Result<f64, TrainError> {
        Ok(forward_value(self, tr)?)
    }
}

/// A model evaluated with its real-valued choice weights.
#[derive(Debug, Clone, Copy)]
pub struct Unquantized<'a>(pub &'a ModelSpec);

impl Classifier for Unquantized<'_> {
    fn score(&self, tr: &Trace) -> Result<f64, TrainError> {
        let mut mt = ModelTape::build(self.0, tr)?;
        mt.tape.set_quantized(false);
        Ok(mt.forward())
    }
}

impl<C: Classifier> Classifier for &C {
    fn score(&self, tr: &Trace) -> Result<f64, TrainError> {
        (*self).score(tr)
    }
}

/// Fraction of traces whose predicted sign differs from the label sign
/// (both with `sign(0) = +1`; continuous labels are thresholded at 0).
pub fn evaluate_mcr(c: &impl Classifier, ds: &Dataset) -> Result<f64, TrainError> {
    mcr_of(c, &ds.traces)
}

pub(crate) fn mcr_of(c: &impl Classifier, traces: &[Trace]) -> Result<f64, TrainError> {
    if traces.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let wrong: Vec<bool> = traces
        .par_iter()
        .map(|t| Ok(sign(c.score(t)?) != sign(t.label)))
        .collect::<Result<_, TrainError>>()?;
    Ok(wrong.iter().filter(|w| **w).count() as f64 / traces.len() as f64)
}

/// MCR from precomputed predictions and labels.
pub fn mcr_from_scores(scores: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    if scores.is_empty() {
        return 0.0;
    }
    let wrong = scores.iter().zip(labels).filter(|(s, l)| sign(**s) != sign(**l)).count();
    wrong as f64 / scores.len() as f64
}
