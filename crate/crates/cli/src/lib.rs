//! Configuration, orchestration and serialized outputs for the `starlattice`
//! command-line tool.

pub mod config;
pub mod output;
pub mod run;
pub mod starcheck;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use output::{
    load_snapshot, read_snapshot, save_snapshot, write_snapshot, Precision, Snapshot,
};
pub use run::{run, Outcome, RunOptions};
