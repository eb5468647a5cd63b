//! Potential resonances in one-dimensional radial scattering, located three
//! ways: wave-packet propagation with window-operator energy projection,
//! phase-shift analysis and S-matrix poles.

pub mod config;
pub mod error;
pub mod fit;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod pipeline;
pub mod potential;
pub mod propagator;
pub mod rational;
pub mod special;
pub mod stationary;
pub mod units;
pub mod window;

pub use error::{Error, Result};
