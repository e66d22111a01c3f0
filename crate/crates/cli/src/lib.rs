pub mod commands;
pub mod config;

pub use commands::{exit_code, run, Command, Outcome, RunOptions};
pub use config::{parse_config, ScenarioConfig};
