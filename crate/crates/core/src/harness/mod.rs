//! Experiment runner: configs, seeded training runs, metrics and reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod run;

pub use config::{DatasetSource, Method, RunConfig};
pub use report::{report_dir, summarize, Report};
pub use run::{run, run_all, run_seed, RunRecord};
