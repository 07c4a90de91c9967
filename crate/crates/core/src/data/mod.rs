//! Datasets of labelled traces: CSV ingestion, synthetic generators, and
//! relabelling.

mod csv_io;
mod generate;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stl::{robustness, Formula, StlError, Trace};

pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use generate::{
    gen_cct, gen_interval, gen_step_threshold, CctParams, StepThresholdParams, INTERVAL_TRACE_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// every label is `+1` or `-1`
    Binary,
    /// labels are robustness values
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub traces: Vec<Trace>,
    pub feature_names: Vec<String>,
    pub label_kind: LabelKind,
    /// where the data came from (generator and seed, or a file path)
    pub provenance: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("trace {trace:?}: time steps must be 0, 1, 2, ...")]
    NonUniformTime { trace: String },
    #[error("trace {trace:?}: label changes within the trace")]
    LabelDisagreement { trace: String },
    #[error("duplicate trace id {0:?}")]
    DuplicateId(String),
    #[error("binary labels must be +1 or -1, trace {trace:?} has {label}")]
    BadLabel { trace: String, label: f64 },
    #[error("traces have {found} features, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_binary_label(v: f64) -> bool {
    v == 1.0 || v == -1.0
}

impl Dataset {
    /// Builds a dataset, inferring the label kind: binary if every label is
    /// `+-1`, continuous otherwise.
    pub fn new(traces: Vec<Trace>, feature_names: Vec<String>, provenance: impl Into<String>) -> Result<Self, DataError> {
        let kind = if traces.iter().all(|t| is_binary_label(t.label)) {
            LabelKind::Binary
        } else {
            LabelKind::Continuous
        };
        Self::with_kind(traces, feature_names, kind, provenance)
    }

    pub fn with_kind(
        traces: Vec<Trace>,
        feature_names: Vec<String>,
        label_kind: LabelKind,
        provenance: impl Into<String>,
    ) -> Result<Self, DataError> {
        let ds = Dataset {
            traces,
            feature_names,
            label_kind,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let dim = self.feature_names.len();
        let mut ids = HashSet::new();
        for t in &self.traces {
            if t.dim() != dim {
                return Err(DataError::DimensionMismatch {
                    expected: dim,
                    found: t.dim(),
                });
            }
            if !ids.insert(t.id.as_str()) {
                return Err(DataError::DuplicateId(t.id.clone()));
            }
            if !t.values().iter().all(|v| v.is_finite()) || !t.label.is_finite() {
                return Err(DataError::Invalid(format!("trace {:?} has non-finite values", t.id)));
            }
            if self.label_kind == LabelKind::Binary && !is_binary_label(t.label) {
                return Err(DataError::BadLabel {
                    trace: t.id.clone(),
                    label: t.label,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Counts of (`+1`, `-1`) labels after thresholding at 0.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.traces.iter().filter(|t| t.label >= 0.0).count();
        (pos, self.len() - pos)
    }

    fn derived(&self, traces: Vec<Trace>, label_kind: LabelKind, note: &str) -> Dataset {
        Dataset {
            traces,
            feature_names: self.feature_names.clone(),
            label_kind,
            provenance: format!("{} | {note}", self.provenance),
        }
    }

    /// Seeded shuffle, then the first `round(train_fraction * n)` traces
    /// (at least one, and at least one left over when `n >= 2`) go to the
    /// training split.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DataError::Invalid(format!("train fraction {train_fraction} is not in (0, 1)")));
        }
        if self.is_empty() {
            return Err(DataError::Empty);
        }
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut k = (train_fraction * n as f64).round() as usize;
        k = k.clamp(1, n.saturating_sub(1).max(1));
        let pick = |ix: &[usize]| ix.iter().map(|i| self.traces[*i].clone()).collect();
        Ok((
            self.derived(pick(&idx[..k]), self.label_kind, "train split"),
            self.derived(pick(&idx[k..]), self.label_kind, "test split"),
        ))
    }
}

/// Reverses every trace in time; labels are unchanged.
pub fn reverse(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    out.traces = ds.traces.iter().map(Trace::reversed).collect();
    out
}

/// Relabels each trace with the robustness of `labeling` at time 0 under
/// future-time semantics, i.e. past-time robustness at the last step of the
/// reversed trace.
pub fn label_continuous(ds: &Dataset, labeling: &Formula) -> Result<Dataset, DataError> {
    let mut traces = Vec::with_capacity(ds.len());
    for t in &ds.traces {
        let rev = t.reversed();
        let rho = *robustness(labeling, &rev)?.last().expect("traces are non-empty");
        let mut t = t.clone();
        t.label = rho;
        traces.push(t);
    }
    Ok(ds.derived(traces, LabelKind::Continuous, &format!("labels: {labeling}")))
}
