//! Small multilayer perceptrons: flat-parameter specs, initialisation,
//! Adam, the positive-definite Lyapunov candidate and checkpoints.

mod adam;
mod checkpoint;
mod lyapunov_net;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{NetCheckpoint, NET_FORMAT, NET_VERSION};
pub use lyapunov_net::{LyapunovNet, DEFAULT_EPS};
pub use mlp::{init_params, init_params_with, Activation, Layer, MlpSpec};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("length mismatch: params {params}, grads {grads}, expected {state}")]
    LengthMismatch { params: usize, grads: usize, state: usize },
    #[error("non-finite gradient {value} at index {index} (after {step} optimizer steps); training diverged")]
    NonFiniteGradient { index: usize, value: f64, step: u64 },
    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: String, expected: String },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
