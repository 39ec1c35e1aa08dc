//! Spectral solvers for two-dimensional quasi-periodic Helmholtz scattering
//! through a slab with transparent boundary conditions.
//!
//! Two discretizations are provided: Fourier x Chebyshev collocation in
//! value space ([`collocation`]) and a Fourier x ultraspherical method in
//! coefficient space ([`tensor`]). Layered media reduce to one-dimensional
//! solves; general media are solved densely or by GMRES preconditioned with a
//! layered medium.

pub mod cheb;
pub mod collocation;
pub mod diagnostics;
pub mod dtn;
pub mod error;
pub mod field;
pub mod formats;
pub mod fourier;
pub mod linalg;
pub mod lowrank;
pub mod medium;
pub mod problem;
pub mod run;
pub mod tensor;
pub mod ultraspherical;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
