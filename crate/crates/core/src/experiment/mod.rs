//! Experiment configs, the (fraction, seed, method) sweep and reports.

mod config;
mod report;
mod run;

pub use config::{parse_key_values, parse_synthetic_spec, DatasetSource, ExperimentConfig};
pub use report::{emit_csv, emit_report, emit_table, parse_csv, ReportFormat, CSV_HEADER};
pub use run::{run_experiment, run_experiment_with, CellArtifacts, CellRecord, ResultRow};
