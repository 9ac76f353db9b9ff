//! Bandit policies under one contract.
//!
//! Each round the harness calls [`Policy::choose_arm`] and then
//! [`Policy::observe`] with the loss of the arm that was returned. Policies
//! are built fresh for every run; constructors of the anytime policies
//! (Tsallis-Switch, Tsallis-INF, EXP3) take no horizon.

mod base;
mod exp3;
mod tsallis;

pub use base::{elimination_radius, grid_points, Base, BaseParams, GridKind};
pub use exp3::{exp3_distribution, exp3_learning_rate, Exp3};
pub use tsallis::TsallisSwitch;

use thiserror::Error;

use crate::ftrl::SolverError;
use crate::types::{CoreError, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("FTRL solver failed: {0}")]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("grid needs 1 <= batches <= horizon, got {batches} batches for horizon {horizon}")]
    InvalidGrid { batches: u64, horizon: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub trait Policy: Send {
    fn arm_count(&self) -> usize;

    /// Arm (0-based) to play at round `t` (1-based).
    fn choose_arm(&mut self, t: u64, rng: &mut SimRng) -> Result<usize, PolicyError>;

    /// Feedback for the arm returned by the preceding `choose_arm`.
    fn observe(&mut self, t: u64, arm: usize, loss: f64) -> Result<(), PolicyError>;

    /// Index (1-based) of the decision block containing the last chosen
    /// round. Per-round policies report the round itself.
    fn block_index(&self) -> u64;

    /// Flushes a partially observed block at the end of the horizon.
    fn finish(&mut self) -> Result<(), PolicyError> {
        Ok(())
    }
}
