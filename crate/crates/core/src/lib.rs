//! Time-discrete geodesic paths between images under the metamorphosis model.
//!
//! A discrete path `U_0, ..., U_K` with fixed endpoints is optimized together
//! with matching deformations `Φ_1, ..., Φ_K`. Deformations are found by
//! nonlinear registration, the intermediate images by a block-tridiagonal
//! linear solve, and the number of time steps is refined cascadically.
//!
//! The crate is `no_std` and only needs `alloc`. Everything touching files,
//! configuration and the command line lives in the companion CLI crate.
//!
//! Module map:
//! - [`fem`]: regular grid, bilinear elements, Simpson quadrature, assembly.
//! - [`energy`]: material densities, pair and path energies, gradients.
//! - [`image_solve`]: optimal intermediate images for fixed deformations.
//! - [`registration`]: Fletcher–Reeves descent for a single deformation.
//! - [`geodesic`]: cascadic alternating minimization and diagnostics.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
mod error;
pub mod fem;
pub mod geodesic;
pub mod image_solve;
pub mod linalg;
pub mod registration;

pub use error::{Error, Result};
pub use fem::{Deformation, Grid, Image, Point, ScalarField, VectorField};
