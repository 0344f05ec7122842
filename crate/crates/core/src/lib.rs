pub mod cli;
pub mod error;
pub mod feynman_kac;
pub mod fourier;
pub mod kernels;
pub mod lattice;
pub mod params;
pub mod quad;
pub mod regimes;
pub mod rng;
pub mod simplex;
pub mod stats;

pub use error::{Error, Result};
pub use params::{ModelParams, QuadratureSpec};
