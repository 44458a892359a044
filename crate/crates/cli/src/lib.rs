//! Scenario files, batch orchestration and result files for `rto-sim`.

pub mod commands;
pub mod output;
pub mod schema;

pub use commands::{cmd_compare, cmd_run, cmd_validate, execute, Cli};
pub use schema::{load_scenario, parse_scenario, LoadError, LoadedScenario, ScenarioFile};
