//! Closures, relative energy, solvers and rate sweeps for the
//! Navier-Stokes-Fourier system with radiation in the vanishing dissipation
//! limit.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod expr;
pub mod grid;
pub mod lowdisc;
pub mod nsf;
pub mod quadrature;
pub mod reduce;
pub mod relative_energy;
pub mod scenario;
pub mod state;
pub mod sweep;
pub mod thermo;

pub use error::{Error, Result};
