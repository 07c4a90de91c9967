use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::train::AdamState;

use super::{FernnError, ModelSpec};

pub const CHECKPOINT_FORMAT: &str = "fernn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to resume or evaluate it.
///
/// Stored as JSON; floats are written in shortest round-trip form so a
/// save/load cycle reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub feature_names: Vec<String>,
    /// the model was trained on time-reversed traces
    #[serde(default)]
    pub reversed: bool,
    #[serde(default)]
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(model: ModelSpec, feature_names: Vec<String>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model,
            feature_names,
            reversed: false,
            optimizer: None,
        }
    }

    pub fn to_json(&self) -> Result<String, FernnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, FernnError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(FernnError::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(FernnError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FernnError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FernnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fernn::{build_fixed_length, BuildOptions, Normalization};

    #[test]
    fn round_trip_is_exact() {
        let mut m = build_fixed_length(4, 2, &BuildOptions { seed: 3, ..Default::default() }).unwrap();
        m.params.values_mut()[0] = 0.1 + 0.2;
        m.params.values_mut()[1] = -1e-300;
        m.normalization = Some(Normalization {
            min: vec![1.0 / 3.0, -7.25],
            max: vec![2.0, 1e10],
        });
        let ck = Checkpoint::new(m, vec!["a".into(), "b".into()]);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        for (x, y) in ck.model.params.values().iter().zip(back.model.params.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_wrong_format() {
        let m = build_fixed_length(2, 1, &BuildOptions::default()).unwrap();
        let mut ck = Checkpoint::new(m, vec![]);
        ck.format = "other".into();
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
        ck.format = CHECKPOINT_FORMAT.into();
        ck.version = 99;
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
    }
}
