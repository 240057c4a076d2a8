//! Triangulation, finite-element matrices and the SPDE precision of a
//! Matérn (ν = 1) field.

mod fem;
mod matern;
mod mesh;
mod projector;
mod spde;

pub use fem::{fem_matrices, FemMatrices};
pub use matern::{bessel_k1, convert_params, matern_correlation, range_and_sd, NU};
pub use mesh::{build_mesh, Mesh, MeshParams};
pub use projector::{build_projector, Projector};
pub use spde::{spde_precision, SpatialPrecision, SpdeOperator};
