//! Strong time discretisation of semilinear hyperbolic stochastic evolution
//! equations `dU + AU dt = F(U) dt + G(U) dW` on the one-dimensional torus.
//!
//! The crate is layered bottom-up:
//!
//! * [`spectral`]: Fourier coefficient fields, transforms, Sobolev norms.
//! * [`operators`]: diagonal generators, exact semigroups and the rational
//!   schemes (exponential, implicit Euler, Crank–Nicolson).
//! * [`noise`]: Q-Wiener increment tapes and the Milstein correction for
//!   commutative noise.
//! * [`models`]: concrete drift/noise pairs (linear and nonlinear
//!   Schrödinger, transport).
//! * [`stepper`]: Euler- and Milstein-type steppers.
//! * [`harness`]: reference solutions, pathwise uniform errors, rate fits,
//!   and complete convergence studies.

pub mod error;
pub mod harness;
pub mod models;
pub mod noise;
pub mod operators;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use num_complex::Complex64;
