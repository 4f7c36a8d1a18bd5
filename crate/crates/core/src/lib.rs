//! One-dimensional quantum hydrodynamics: spectral NLS evolution, polar
//! factorization into hydrodynamic fields, lifting back to wave functions,
//! and the functional diagnostics built on top of them.

pub mod decay_fit;
pub mod eos;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod initial;
pub mod lifting;
pub mod nls;
pub mod par;
pub mod polar;
pub mod vacuum_measure;

pub use eos::GammaLaw;
pub use error::{QhdError, Result};
pub use grid::{ComplexField, Grid, RealField};
pub use nls::{evolve, nls_step, NlsParams, Trajectory};
pub use num_complex::Complex64;
pub use par::Execution;
pub use polar::{energy_density, polar_factorize, HydroState, VacuumMask};
