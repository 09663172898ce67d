//! Scenario runner, cost table and ledger inspection for chainid.

pub mod config;
pub mod costs;
pub mod engine;
pub mod inspect;
pub mod scenarios;
pub mod transcript;

pub use config::{Action, ConfigError, ScenarioConfig, Step};
pub use engine::{run, RunOptions, RunResult};
pub use transcript::{StepDetail, Transcript, TRANSCRIPT_SCHEMA_VERSION};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const STEP_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
