use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpSpec, NnError};

pub const NET_FORMAT: &str = "harvest-mlp";
pub const NET_VERSION: u32 = 1;

/// Versioned JSON record of a network: spec plus flat parameters.
/// Floats are written in shortest round-trip form, so reloading is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub format: String,
    pub version: u32,
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

impl NetCheckpoint {
    pub fn new(spec: MlpSpec, params: Vec<f64>) -> Result<Self, NnError> {
        if params.len() != spec.n_params() {
            return Err(NnError::LengthMismatch { params: params.len(), grads: 0, state: spec.n_params() });
        }
        Ok(NetCheckpoint { format: NET_FORMAT.into(), version: NET_VERSION, spec, params })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let ckpt: NetCheckpoint = serde_json::from_str(text).map_err(|e| NnError::Format(e.to_string()))?;
        if ckpt.format != NET_FORMAT || ckpt.version != NET_VERSION {
            return Err(NnError::VersionMismatch {
                found: format!("{} v{}", ckpt.format, ckpt.version),
                expected: format!("{NET_FORMAT} v{NET_VERSION}"),
            });
        }
        if ckpt.params.len() != ckpt.spec.n_params() {
            return Err(NnError::Format(format!(
                "{} parameters stored for a spec with {}",
                ckpt.params.len(),
                ckpt.spec.n_params()
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()).map_err(|e| NnError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NnError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }
}
