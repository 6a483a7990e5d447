//! Variable-exponent modulars, Luxemburg norms, discrete total variation and
//! the mixed BV-Sobolev capacities on one- and two-dimensional regular grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: geometry, node masks, dilation and mollification.
//! - [`exponent`]: sampled variable exponents and their regularity diagnostics.
//! - [`bv`]: forward-difference gradients, total variation, perimeter.
//! - [`lebesgue`]: modulars, Luxemburg norms, the first-order Sobolev modular.
//! - [`mixed`]: the split and relaxed mixed pseudo-modulars and theorem probes.
//! - [`solver`]: the primal-dual minimiser behind every capacity computation.
//! - [`capacity`]: mixed and Sobolev capacities and the axiom checks.

pub mod bv;
pub mod capacity;
pub mod error;
pub mod exponent;
pub mod gf;
pub mod grid;
pub mod lebesgue;
pub mod mixed;
pub mod solver;

pub use bv::GradientMode;
pub use capacity::{
    capacity, check_capacity_axioms, Axiom, AxiomReport, AxiomScenario, CapacityKind,
    CapacityResult,
};
pub use error::{Error, Result};
pub use exponent::ExponentField;
pub use grid::{Grid, GridFunction, RegionMask};
pub use lebesgue::EnergyBreakdown;
pub use solver::{minimize_capacity_energy, prox_power, SolveCertificate, SolverConfig};

/// Default node-equality tolerance used to decide `p(x) = 1`.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;
