//! Numerics for the one-photon Hilbert space on a truncated light cone.
//!
//! The crate samples photon states on a spherical momentum grid and provides
//! the helicity/vector/position representations, the Hawton position operator
//! with commutator diagnostics, free evolution under `H = |p|` together with
//! Maxwell residual checks, and the time-of-arrival POVM at a detector point.
//!
//! Natural units `ħ = c = 1` are used throughout.

pub mod arrival;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod par;
pub mod photon_state;
pub mod polarization;
pub mod position_op;
pub mod quadrature;
pub mod sphgrid;
pub mod state_io;

pub use error::{Error, Result};
pub use polarization::Helicity;
pub use sphgrid::{GridParams, MomentumGrid, PolarMap, RadialMap};

/// Complex scalar used everywhere in the crate.
pub type C64 = num_complex::Complex64;
/// Real 3-vector (momenta, positions).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Complex 3-vector (polarizations, vector amplitudes).
pub type Vec3C = nalgebra::Vector3<C64>;
/// Complex 3x3 matrix.
pub type Mat3C = nalgebra::Matrix3<C64>;
