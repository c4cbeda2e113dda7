//! Spectral Galerkin laboratory for the stochastically forced 2D
//! Navier–Stokes vorticity equation on the torus `[0, 2π]²`.
//!
//! The crate covers the truncated dynamics, its forward and adjoint
//! linearizations, the Malliavin covariance matrix, the lattice
//! combinatorics of noise propagation, and quadratic-variation tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flows;
pub mod lattice;
pub mod linalg;
pub mod malliavin;
pub mod par;
pub mod quadvar;
pub mod rng;
pub mod sde;
pub mod spectral;

pub use error::{LabError, Result};
pub use lattice::{ForcingGeometry, ModeIndex, ModeSet};
pub use sde::{simulate, SimConfig, Trajectory};
pub use spectral::{Basis, SpectralField};
