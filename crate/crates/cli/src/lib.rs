//! Command-line front end: configuration, stage helpers, the full pipeline
//! and SVG plots.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod stages;
pub mod svg;

pub use config::RunConfig;
pub use error::{CliError, CliResult, ErrorKind};
pub use pipeline::{run_pipeline, PipelineSummary};
