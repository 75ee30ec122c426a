//! Configuration, CSV output and subcommands of the `felsim` binary.
pub mod commands;
pub mod config;
pub mod presets;
pub mod table;
pub mod units;

pub use commands::{analyze, pulse_stats, scan, AnalyzeOptions, RunOptions};
pub use config::{parse_config, ConfigErrors, RunConfig};
pub use table::{read_table, Report};
