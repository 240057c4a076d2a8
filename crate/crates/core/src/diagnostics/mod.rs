//! Pre-model diagnostics: spatial and temporal autocorrelation tests and
//! collinearity screening.

mod stats;
mod weights;

pub use stats::{
    autocorrelation, ljung_box, morans_i, pearson_matrix, screen_covariates, vif, DroppedVariable,
    LjungBox, MoranResult, ScreeningReport,
};
pub use weights::{build_spatial_weights, knn_weights, SpatialWeights, WeightScheme};
