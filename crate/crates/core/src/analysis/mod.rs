//! Accuracy metrics, hotspot clustering and regional aggregation.

mod cluster;
mod metrics;
mod regions;

pub use cluster::{
    adjusted_rand_index, cluster_intervals, elbow_select, interval_tiling, kmeans, kmeans_path, label_levels,
    standardize_interval, ClusterOptions, ClusterResult, KMeans, Level, StandardizeAxis,
};
pub use metrics::{rmse_mae, rmse_mae_aligned, Accuracy};
pub use regions::{region_aggregate, RegionalSeries};
