//! WaveHoltz: solving the Helmholtz equation by time-filtering solutions of
//! the wave equation on Cartesian grids.

pub mod error;
pub mod filter;
pub mod grid;
pub mod linalg;
pub mod pollution;
pub mod timestep;
pub mod waveholtz;

pub use error::{Error, Result};
