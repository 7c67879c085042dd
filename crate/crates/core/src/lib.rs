//! Pseudospectral laboratory for the 2-D periodic stochastic Navier-Stokes
//! equations and the stochastic Leray-alpha model driven by the same noise.
//!
//! The building blocks, bottom-up:
//!
//! * [`spectral`]: divergence-free Fourier fields, Leray projection, Stokes
//!   powers, the Helmholtz filter `(I + alpha^2 A)^{-1}` and norms.
//! * [`nonlinear`]: the dealiased bilinear term `B(u, v)`.
//! * [`noise`]: a diagonal multiplicative/additive noise coefficient and
//!   counter-based Wiener increments.
//! * [`integrator`]: coupled semi-implicit Euler-Maruyama stepping.
//! * [`estimators`]: error functional, stopping times, energy monitors.
//! * [`experiment`]: Monte Carlo studies, rate fits, configuration and output.

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod integrator;
pub mod noise;
pub mod nonlinear;
pub mod snapshot;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{Grid, GridSpec, NormKind, SpectralVelocity};
