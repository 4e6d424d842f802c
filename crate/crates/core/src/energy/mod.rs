//! Deformation energies: material densities, the higher-order term, the
//! matching functional, pair and path energies and the deformation gradient.

mod density;
mod pair;
mod params;

pub use density::{density, density_derivative, second_derivative_check, Density, Mat2, DET_BARRIER};
pub use pair::{
    deformation_gradient, higher_order_energy, pair_energy, pair_energy_and_gradient, path_energy, PairEnergy,
    PairProblem, PathEnergy,
};
pub use params::{ogden_coeffs, MaterialParams, Model, OgdenCoeffs};
