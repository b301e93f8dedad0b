//! End-to-end runs: baselines, agent training and held-out evaluation,
//! emitting one CSV row per metric per resample step.

mod config;
mod episode;
mod metrics;
mod run;
pub mod sanity;

pub use config::{
    selector_ratios, AgentChoice, BaselineConfig, EnvId, ExperimentConfig, LyapunovConfig, ParamDist, PinnConfig,
    TrainConfig, UNIFORM_SELECTOR,
};
pub use episode::{roa_grid, run_lyapunov_episode, run_pinn_episode, Control, EpisodeLog, Learner};
pub use metrics::{
    metric_values, read_metrics, Manifest, MetricsRow, MetricsWriter, Record, MANIFEST_FORMAT, METRICS_HEADER,
};
pub use run::{
    baselines, check_checkpoint, evaluate, mean, median, run_seeds, sub_run, train_agent, RunContext, Selection,
};

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {field}: {detail}")]
    Config { field: String, detail: String },
    #[error("resample step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<crate::Error>,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("metrics file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Inner(Box<crate::Error>),
}

impl HarnessError {
    pub fn config(field: &str, detail: impl Into<String>) -> Self {
        HarnessError::Config { field: field.into(), detail: detail.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    /// Annotates a submodule error with the resample step it came from.
    pub fn at(step: usize, e: impl Into<crate::Error>) -> Self {
        HarnessError::Step { step, source: Box::new(e.into()) }
    }
}

macro_rules! from_inner {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Inner(Box::new(e.into()))
            }
        }
    )*};
}

from_inner!(crate::pde::PdeError, crate::lyapunov::LyapunovError, crate::rl::RlError, crate::samplers::SamplerError, crate::nn::NnError);
