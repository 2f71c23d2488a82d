//! Experiment orchestration: Monte Carlo sweeps, paired theory, ROC, sum-rate,
//! the simultaneous-access baseline and run artifacts.

pub mod presets;
pub mod record;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use record::{CellKey, MetricRecord, Source};
pub use sweep::{run_roc, run_sa_baseline, run_sweep, Metric, SweepSpec};
