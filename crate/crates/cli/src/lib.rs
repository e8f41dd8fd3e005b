//! The `jetssm` command-line pipeline as a library: checkpoints, run
//! configuration and the subcommands.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod io;
pub mod plot;
pub mod stream;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
