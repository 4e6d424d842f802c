//! File formats, configuration and the command line for the metamorphosis
//! geodesic solver.

pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod image_io;
pub mod outputs;
pub mod pnm;
pub mod render;
pub mod validate;

pub use error::{CliError, Result};
