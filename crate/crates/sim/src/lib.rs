//! Command-line front end and scenario file handling for the TDMA MAC
//! simulator. All protocol logic lives in `gmac-core`; this crate owns IO:
//! the scenario format, trace files, and the subcommand dispatch.

pub mod commands;
pub mod scenario;

pub use commands::{run_cli, run_sweep_parallel, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
pub use scenario::{load_scenario, serialize_scenario, Scenario, ScenarioError};
