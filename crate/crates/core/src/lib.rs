//! Numerical toolkit for semilinear fractional heat equations
//! `u_t = -(-Δ)^{α/2} u + f(u)` with singular initial data.
//!
//! * [`kernel`]: the α-stable heat kernel and its comparability constants.
//! * [`osgood`]: the ladder-built Osgood nonlinearity and its comparison function.
//! * [`semigroup`]: the linear evolution of `|x|^{-β} χ_R` and its lower bounds.
//! * [`blowup`]: divergent mass functionals and a truncated-data simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod error;
pub mod kernel;
pub mod osgood;
pub mod quadrature;
pub mod semigroup;
pub mod special;

pub use blowup::{
    admissible_params, divergence_functional, local_mass_divergence, simulate_truncated,
    CertifiedConstants, DivergenceReport, ExperimentParams, Trajectory,
};
pub use error::{Error, Result};
pub use kernel::{stable_profile, BoundReport, StableKernel};
pub use osgood::{build_family, OsgoodFamily};
pub use quadrature::Estimate;
pub use semigroup::{make_initial_data, InitialData, RadialField};

/// Crate version, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
