//! Monte Carlo experiment harness: configuration, metric estimators and the
//! trial runner that emits one CSV row per (sweep point, arm, user, metric).

pub mod config;
pub mod metrics;
pub mod runner;

pub use config::{CsiMode, ExperimentConfig, FseDesign, Scenario, Sweep, SweepParam, Waveform};
pub use metrics::{
    count_bit_errors, empirical_cdf, interquartile_range, ks_distance, measure_ber, measure_sinr, nmse, quantile,
};
pub use runner::{run_experiment, write_csv, MetricRow, CSV_HEADER};
