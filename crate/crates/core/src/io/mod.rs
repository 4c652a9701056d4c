//! Configuration, figure scenarios and deterministic file output.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, parse_config_with_env, parse_layers, ConfigError, RunConfig, PRESETS};
pub use output::{flow_table, write_artifacts, Artifact, Format, Table};
pub use scenario::{run_scenario, RunError, RunOptions};
