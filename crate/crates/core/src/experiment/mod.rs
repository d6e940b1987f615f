//! Declarative experiments: TOML configs with parameter sweeps, a parallel
//! runner writing versioned CSV results, summary reports and binary dumps.

mod config;
mod dump;
mod report;
mod results;
mod run;

pub use config::{load_config, parse_config, ExperimentConfig, McSettings, SweepPoint, SweepSpec};
pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use report::{summarize, write_summary, SummaryRow};
pub use results::{read_results, write_results, ResultRow, ResultTable, RESULTS_SCHEMA};
pub use run::{results_path, run_experiment, run_file, RunOptions};
