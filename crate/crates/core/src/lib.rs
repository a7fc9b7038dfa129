//! Movable-antenna (MA) assisted multicast beamforming.
//!
//! A transmitter carries `N` antennas that can be relocated among `M`
//! discrete candidate positions inside a planar region, and broadcasts a
//! common message to `K` single-antenna users. The library synthesizes
//! field-response channels over the position grid, jointly optimizes the
//! transmit beamformer and the antenna placement, and drives Monte Carlo
//! experiments comparing the movable array against a fixed uniform linear
//! array.
//!
//! Modules:
//!
//! - [`channel`] — position grids, multipath channel models, steering
//!   vectors, and seeded scenario sampling.
//! - [`beamforming`] — the max-min multicast objective and the successive
//!   convex approximation (SCA) beamforming solver, including the
//!   channel-subspace parametrization.
//! - [`placement`] — element-wise antenna position search and the outer
//!   alternating optimization over (beamformer, placement).
//! - [`two_user`] — closed-form optimal beamformer and rate for two users,
//!   plus greedy placement built on the closed form.
//! - [`los_bab`] — exact branch-and-bound and exhaustive solvers for the
//!   two-user line-of-sight placement problem, phrased as a binary
//!   quadratic program with a cardinality constraint.
//! - [`sim`] — experiment configs, Monte Carlo driver, CSV/SVG output, and
//!   the fixed-position-antenna baseline.

pub mod beamforming;
pub mod channel;
pub mod los_bab;
mod math;
pub mod placement;
pub mod sim;
pub mod two_user;

use thiserror::Error;

/// Errors produced by solvers, validators, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("all channel vectors are zero")]
    ZeroChannel,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration cap exceeded: C({m}, {n}) = {count} > {cap}")]
    CapExceeded { m: usize, n: usize, count: u128, cap: u128 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
