//! Nonlinear potential estimates made computable.
//!
//! The crate evaluates truncated Riesz and Wolff potentials of nonnegative
//! measures, checks capacity-type smallness conditions, sums dyadic Carleson
//! quantities, builds the supersolution of the integral obstacle problem and
//! evaluates two-sided pointwise bounds for `-Δ_p u = σ u^{p-1} + ω`.
//! Everything is checked against independent oracles in [`oracle`].

pub mod baseline;
pub mod bounds;
pub mod capacity;
pub mod dyadic;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod oracle;
pub mod parallel;
pub mod potentials;
pub mod quadrature;

pub use error::{Error, Result};
pub use measures::{Mass, Measure, Region};
pub use potentials::{PotValue, Quadrature};
