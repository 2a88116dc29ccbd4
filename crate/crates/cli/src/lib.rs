//! Batch front end for the `parctrl` heat-control experiments: config
//! parsing, command dispatch, CSV/SVG outputs and run manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod problem;
pub mod profile;
pub mod svg;
pub mod verify;

pub use commands::{run, Command, RunReport};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
