//! Command-line front end: study configuration, run manifests and report
//! rendering on top of `nroy-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

pub use commands::{run, Cli};
pub use config::{bundled_two_box_study, StudyConfig};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
