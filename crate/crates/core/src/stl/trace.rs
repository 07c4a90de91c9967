use serde::{Deserialize, Serialize};

use super::StlError;

/// A uniformly sampled, `len() x dim()` discrete-time signal with its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    dim: usize,
    values: Vec<f64>,
    pub label: f64,
}

impl Trace {
    pub fn new(id: impl Into<String>, rows: Vec<Vec<f64>>, label: f64) -> Result<Self, StlError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(StlError::EmptyTrace);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(StlError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(Trace {
            id: id.into(),
            dim,
            values: rows.into_iter().flatten().collect(),
            label,
        })
    }

    /// Single-feature trace.
    pub fn scalar(id: impl Into<String>, xs: &[f64], label: f64) -> Result<Self, StlError> {
        Trace::new(id, xs.iter().map(|x| vec![*x]).collect(), label)
    }

    pub fn from_flat(
        id: impl Into<String>,
        dim: usize,
        values: Vec<f64>,
        label: f64,
    ) -> Result<Self, StlError> {
        if dim == 0 || values.is_empty() {
            return Err(StlError::EmptyTrace);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(StlError::DimensionMismatch {
                expected: dim,
                found: values.len() % dim,
            });
        }
        Ok(Trace {
            id: id.into(),
            dim,
            values,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[k])
    }

    /// Same trace with rows in reverse chronological order.
    pub fn reversed(&self) -> Trace {
        let mut values = Vec::with_capacity(self.values.len());
        for r in self.values.chunks_exact(self.dim).rev() {
            values.extend_from_slice(r);
        }
        Trace {
            id: self.id.clone(),
            dim: self.dim,
            values,
            label: self.label,
        }
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Trace {
        let dim = self.dim;
        Trace {
            id: self.id.clone(),
            dim,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| f(i % dim, *v))
                .collect(),
            label: self.label,
        }
    }
}
