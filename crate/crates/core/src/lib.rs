//! Numerical laboratory for the planar reduction of 3D ideal compressible
//! MHD: the 7x7 quasilinear system, its designed wave decomposition, the
//! interaction-coefficient structure checks, a characteristic-upwind solver
//! with characteristic tracing, and the shock-formation experiments.

pub mod config;
pub mod error;
pub mod params;
pub mod report;
pub mod scalar;

pub mod coeffs;
pub mod decomp;
pub mod experiments;
pub(crate) mod hqr;
pub mod eigen;
pub mod sample;
pub mod solver;
pub mod state;

pub use error::{Error, Result};
pub use params::PhysParams;

/// Default scalar for concrete work; the algebra modules stay generic.
pub type Real = f64;

pub use eigen::{EigenSystem, EigenSystemOf, SystemMatrix};
pub use state::{Regime, State, StateOf, WaveSpeeds, WaveSpeedsOf};
