//! Experiment runner behind the `guided-mapf` binary.
//!
//! A batch is the product of algorithm labels, agent counts and seeds on a
//! single map. Every run appends one row to `runs.csv`; lifelong runs also
//! leave a JSONL event log and one-shot runs a solution file. After the
//! batch, `summary.csv` and the series under `plot/` are derived from the
//! collected rows.

pub mod algorithm;
pub mod batch;
pub mod config;
pub mod report;

pub use algorithm::{Algorithm, Knobs};
pub use batch::{run_batch, ResultTable, RunRecord, RunResult};
pub use config::{Args, ConfigError, Mode, RunConfig};
pub use report::{emit_plot_data, summarize};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUN_ERROR: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const TIMEOUT: i32 = 3;
}
