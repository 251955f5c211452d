//! Strong simulation of Itô SDEs: Euler–Maruyama and Milstein schemes,
//! approximations of mixed double Itô integrals, and convergence-order
//! estimation with or without an exact solution.
//!
//! Paths come from a [`wiener::WienerTree`], a seeded hierarchy of
//! Brownian-bridge refinements. Any level, and any subdivision of a step,
//! can be recomputed from `(master seed, replicate)` alone, which keeps
//! coarse and fine simulations on the same path and makes every study
//! independent of the worker count.

pub mod cli;
pub mod convergence;
pub mod error;
pub mod iterint;
pub mod models;
pub mod parallel;
pub mod rng;
pub mod schemes;
pub mod wiener;

pub use error::{Result, SimError};
pub use iterint::{DoubleIntegralMethod, IntegralPair};
pub use schemes::{MultiSde, NoiseStructure, PathResult, ScalarSde};
pub use wiener::{TimeGrid, WienerSegment, WienerTree};

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
