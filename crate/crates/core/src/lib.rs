//! Finite-difference laboratory for the pseudo-p-Laplacian.

pub mod barrier;
pub mod cli;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod jets;
pub mod linalg;
pub mod operator;
pub mod presets;
pub mod regularity;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Grid, GridSpec, NodeClass, ScalarField, Shape};
pub use operator::Form;
