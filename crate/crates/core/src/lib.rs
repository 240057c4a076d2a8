pub mod analysis;
pub mod cli;
pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod mesh_spde;
pub mod model;
pub mod output;
pub mod scalar;
pub mod simulate;
