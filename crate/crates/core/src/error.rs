use crate::autodiff::AutodiffError;
use crate::harness::HarnessError;
use crate::lyapunov::LyapunovError;
use crate::nn::NnError;
use crate::pde::PdeError;
use crate::rl::RlError;
use crate::samplers::SamplerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
