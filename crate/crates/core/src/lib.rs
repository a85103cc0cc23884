//! Numerical toolkit for nonlinear potential theory and boundary regularity
//! of the degenerate parabolic p-Laplacian (p > 2).
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: rough domains `E ⊂ R^N` (N = 1, 2), cubes and lattices.
//! * [`energy`]: the discrete p-Dirichlet energy and its reweighted minimizer,
//!   shared by the capacity and PDE solvers.
//! * [`capacity`]: condenser p-capacities, relative capacity `δ(ρ)`, and
//!   parabolic capacity by time slicing.
//! * [`wiener`]: capacity profiles on geometric radii, the Wiener sum, the
//!   subsequence selection and oscillation cascade, and the decay envelope.
//! * [`pde`]: backward-Euler solver for `u_t = div(|Du|^{p-2} Du)` on masked
//!   Cartesian grids, plus oscillation measurements.
//! * [`probes`]: weak Harnack, spreading and envelope-regression probes.
//!
//! Data-parallel loops go through [`exec`], which runs on rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod capacity;
pub mod energy;
mod error;
pub mod exec;
pub mod geometry;
pub mod params;
pub mod pde;
pub mod probes;
pub mod wiener;

pub use error::{Error, Result};
pub use params::{StructureConstants, StructureParams};

/// Floor applied to gradient magnitudes before forming reweighting factors.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// Version of this crate, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
