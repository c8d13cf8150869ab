//! Gibbs measures of interacting particle systems on compact model spaces.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`spaces`]: circle, flat torus, sphere and Euclidean boxes with quadrature
//!   grids, spectral bases and Green functions of the Laplacian,
//! * [`measures`]: empirical and grid measures, relative entropy, a
//!   bounded-Lipschitz surrogate of the weak topology,
//! * [`energy`]: k-body energies `W_n`, their mean-field limits `W`,
//!   background charges and confining transforms,
//! * [`equilibrium`]: free-energy minimisation by entropic mirror descent and
//!   the mean-field optimality certificates,
//! * [`finite`]: finite spaces, exact enumeration of `Z_n` over occupation types,
//! * [`sampler`]: Metropolis-Hastings sampling of the normalised Gibbs measure,
//!   with optional parallel tempering,
//! * [`functional`]: functionals of measures evaluated on empirical measures,
//! * [`fekete`]: zero-temperature minimisation of `W_n`,
//! * [`ldp`]: numerical checks of the Laplace and large deviation principles.
//!
//! File formats, the command line and parallel drivers live in the companion
//! `gibbs-lab` crate.
#![no_std]

extern crate alloc;

pub mod energy;
pub mod equilibrium;
mod error;
pub mod fekete;
pub mod finite;
pub mod functional;
pub mod ldp;
pub mod math;
pub mod measures;
mod prelude;
pub mod rng;
pub mod sampler;
pub mod simplex;
pub mod spaces;

pub use error::{Error, Result};
pub use spaces::{Point, Space, SpaceKind, SpaceSpec};
