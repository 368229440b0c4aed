//! Numerical toolkit for the stable manifold of the ground-state soliton of the focusing
//! power Klein-Gordon equation `u_tt - u_xx + u - |u|^{2 alpha} u = 0` on the line.

pub mod analysis;
pub mod config;
pub mod dft;
pub mod dynamics;
pub mod error;
pub mod manifold;
pub mod pipeline;
pub mod grid;
pub mod potential;
pub mod scattering;
pub mod soliton;
pub mod tridiag;

pub use error::{KgError, Result};
pub use grid::GridSpec;
pub use potential::Potential;
