//! Input tables, spatial alignment of gridded data and variable transforms.

mod geometry;
mod tables;

pub use geometry::{grid_to_area_average, load_polygons, parse_polygons, Polygon};
pub use tables::{
    compute_log_rates, load_area_table, load_case_table, load_covariates, load_grid,
    log_transform_density, Area, AreaTable, CaseRow, CaseTable, CovariateTable, GridCell,
    GridField, LogRate, MIN_REPORTED,
};
