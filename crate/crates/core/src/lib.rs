//! Stochastic lattice wave equation with energy- and momentum-conserving noise.
//!
//! The crate covers the whole chain of objects needed to look at the weak-noise
//! kinetic limit of a harmonic chain numerically:
//!
//! * [`model`]: dispersion relation, noise coefficients and scattering kernels;
//! * [`chain`]: time integration of the microscopic Itô system on a periodic lattice;
//! * [`wavefield`]: the complex wave function, its compensated version and
//!   empirical correlation estimators;
//! * [`kinetic`]: the linear Boltzmann equation and the scattering rate;
//! * [`ou`]: samplers and closed-form moments of the limiting Ornstein-Uhlenbeck
//!   processes;
//! * [`moments`]: the exact second-moment ODE of the finite chain;
//! * [`experiments`]: initial data, estimators and the ε-sweep harness.
//!
//! Mode grids follow the torus convention `k ∈ [-1/2, 1/2)`. Forward discrete
//! Fourier transforms are unnormalized, `ψ̂(k) = Σ_y ψ_y exp(-2πi y k)`, so the
//! continuum integral `∫ |ψ̂|² dk` becomes `(1/N) Σ_j |ψ̂(k_j)|²` on a lattice of
//! `N` sites.

pub mod chain;
pub mod error;
pub mod experiments;
pub mod kinetic;
pub mod moments;
pub mod model;
pub mod ou;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod wavefield;

pub use error::{Error, Result};
pub use num_complex::Complex64;
