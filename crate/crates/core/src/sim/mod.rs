//! Experiment configuration, the closed-loop harness, logging, metrics,
//! property suites and parameter sweeps.

pub mod config;
pub mod harness;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::SimConfig;
pub use harness::{run_closed_loop, run_closed_loop_partial, SimLog, SimRecord};
pub use output::{compute_metrics, write_csv, Metrics, CSV_HEADER};
pub use verify::{verify_suite, Report, Suite};
