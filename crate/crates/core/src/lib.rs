//! Adaptive training-input selection for networks trained under universal
//! constraints.
//!
//! An outer reinforcement-learning policy chooses how training inputs are
//! drawn for an inner, gradient-trained network:
//!
//! - for Lyapunov networks it picks the level-set expansion multiplier used
//!   when sampling new states around the current certified region;
//! - for physics-informed networks it picks mixture weights over five base
//!   collocation samplers (grid, pseudo-random, Sobol, Halton, RAD).
//!
//! The crate is organised bottom-up: [`autodiff`] and [`nn`] provide the
//! differentiable networks, [`pde`], [`samplers`] and [`lyapunov`] the two
//! inner problems, [`rl`] the agents and MDP adapters, and [`harness`] runs
//! baselines, agent training and evaluation while emitting metric rows.

pub mod autodiff;
pub mod harness;
pub mod lyapunov;
pub mod nn;
pub mod par;
pub mod pde;
pub mod rl;
pub mod samplers;
pub mod seed;

mod error;

pub use error::{Error, Result};
