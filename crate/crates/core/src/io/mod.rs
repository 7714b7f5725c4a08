//! Run configuration, checkpoints, sweep tables and front metrics.

mod checkpoint;
mod config;
mod table;

pub use checkpoint::{Checkpoint, TensorRecord, FORMAT_VERSION};
pub use config::RunConfig;
pub use table::{front_metrics, read_sweep_csv, write_sweep_csv, FrontMetrics, SweepTable};
