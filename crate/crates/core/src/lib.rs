//! Emulator for the quantum homotopy analysis method on quadratic PDEs.

pub mod discretize;
pub mod error;
pub mod func;
pub mod grid;
pub mod ham;
pub mod integrator;
pub mod iqham;
pub mod linearizer;
pub mod par;
pub mod pipeline;
pub mod pde;
pub mod poly;
pub mod sparse;

pub use error::{Error, Result};
