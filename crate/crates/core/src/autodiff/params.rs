use serde::{Deserialize, Serialize};

use super::ParamId;

/// Flat parameter vector. Non-trainable slots hold values the graph reads
/// but the optimizer never touches (window shifts).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    values: Vec<f64>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) -> ParamId {
        self.push(value, true)
    }

    pub fn add_fixed(&mut self, value: f64) -> ParamId {
        self.push(value, false)
    }

    fn push(&mut self, value: f64, trainable: bool) -> ParamId {
        let id = ParamId(self.values.len() as u32);
        self.values.push(value);
        self.trainable.push(trainable);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, p: ParamId) -> f64 {
        self.values[p.index()]
    }

    pub fn set(&mut self, p: ParamId, v: f64) {
        self.values[p.index()] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_trainable(&self, p: ParamId) -> bool {
        self.trainable[p.index()]
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }
}
