//! Bilinear finite elements on a regular quadrilateral grid.
//!
//! Nodes are numbered lexicographically (`index = iy * nx + ix`), cells the
//! same way with `nx - 1` cells per row. Local node order inside a cell is
//! lower-left, lower-right, upper-left, upper-right.

mod assembly;
mod field;
mod grid;
mod quadrature;
mod sparse;

pub use assembly::{
    assemble_mass, assemble_stiffness, assemble_warped_mass, lumped_mass, FemOperators,
};
pub use field::{Deformation, Image, ScalarField, VectorField};
pub use grid::{CellCoords, Grid, Point};
pub use quadrature::{quad_integrate, QuadPoint, QuadRule};
pub use sparse::CsrMatrix;

pub(crate) use grid::{bilinear_basis as grid_basis, bilinear_basis_grad as grid_basis_grad};
