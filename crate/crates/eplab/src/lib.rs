//! Numerical laboratory for pump-induced eigenvalue coalescence in a
//! single-mode laser with polarization-correlation decay.
//!
//! The crate has three layers:
//!
//! * the mean-field model: equations of motion, stationary points, and
//!   time integration ([`model`], [`integrate`], [`ode`]);
//! * spectral analysis of the linearization: the cubic eigenproblem,
//!   eigenvector overlaps, branch tracking, and exceptional-point
//!   location ([`cubic`], [`spectrum`], [`ep`]);
//! * an exact two-molecule density-matrix benchmark that pins down the
//!   dissipator rates independently of the mean-field derivation
//!   ([`lindblad`]).
//!
//! Sweeps are data-parallel through [`par::par_map`] when the `parallel`
//! feature (on by default) is enabled, and sequential otherwise.

pub mod cubic;
pub mod ep;
pub mod error;
pub mod integrate;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod par;
pub mod params;
pub mod report;
pub mod spectrum;
pub mod svg;

pub use error::{Error, Result};
pub use params::{DerivedRates, ModelParams};
