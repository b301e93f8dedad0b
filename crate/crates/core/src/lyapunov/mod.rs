//! Inverted pendulum under saturated LQR, level-set sampling and labelling,
//! hinge-loss training of the Lyapunov classifier and the safe-set metric.

mod levelset;
mod pendulum;
mod roa;
mod trainer;

pub use levelset::{
    classifier_update, hinge, label_batch, net_values, sample_level_set, simulate_batch, update_level, LevelUpdate,
    StateBox, PROPOSAL_BUDGET,
};
pub use pendulum::{dare, lqr_gain, spectral_radius, ClosedLoop, PendulumParams, State};
pub use roa::{initial_level, safe_set_fraction, RoaGrid, SafeCellValues, SAFE_RADIUS};
pub use trainer::{LevelSetConfig, LevelSetState, LevelSetTrainer, StepReport};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum LyapunovError {
    #[error("invalid pendulum parameters: {0}")]
    InvalidParams(String),
    #[error("Riccati iteration did not converge in {iters} iterations")]
    DareNotConverged { iters: usize },
    #[error("safety level must be positive, got {c}")]
    InvalidLevel { c: f64 },
    #[error("expansion multiplier must be at least 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("degenerate level set: {accepted} of {proposals} proposals accepted")]
    DegenerateLevelSet { accepted: usize, proposals: usize },
    #[error("classifier batch is empty")]
    EmptyBatch,
    #[error("hinge loss is not finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("no neighbourhood of the origin is stabilized by the controller")]
    NoStableNeighbourhood,
    #[error("corrupt grid cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}
