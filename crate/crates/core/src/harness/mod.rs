//! Experiment specifications, sweeps, CSV output and the Monte-Carlo oracle.

pub mod experiment;
pub mod oracle;
pub mod table;

pub use experiment::{
    config_hash, run_experiment, Axis, AxisUnits, ExperimentKind, ExperimentSpec, UeLayout, WORKERS_ENV,
};
pub use oracle::{run_oracle_suite, OracleOptions, OracleReport};
pub use table::{emit_csv, read_csv, ResultTable};
