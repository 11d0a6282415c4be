//! File formats, configuration, parallel execution and the command-line
//! front-end around `ubemval-core`.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
