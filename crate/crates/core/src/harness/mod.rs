//! Experiment configuration, mesh sweeps, CSV output and the validation
//! suite behind the command-line tool.

mod config;
pub mod sweep;
pub mod table;
mod validate;

pub use config::{geometric_mesh, ExperimentConfig};
pub use sweep::{
    critical_sizes, find_crossing, rates_table, run_fig1_sweep, run_fig2_sweep, CriticalSizes, Crossing,
    Fig1Sweep, Flags, McEstimate, ModelCell, RatesRow, SweepRow,
};
pub use table::{read_csv, write_csv};
pub use validate::{run_validation_suite, Check, ValidationReport};
