//! Scenario configs, experiment runners and the CLI.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod stats;

pub use cli::cli_entry;
pub use config::ScenarioConfig;
