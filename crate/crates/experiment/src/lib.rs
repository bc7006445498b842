//! Experiment runner for the `simovar` command-line tool: TOML configs,
//! Monte Carlo campaigns, closed-form reports and CSV tables.

pub mod config;
pub mod error;
pub mod reproduce;
pub mod runner;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use reproduce::Figure;
pub use runner::{analyze, optimize, run};
pub use table::{FigureTable, OptimizeTable, ReportTable};
