//! Library side of the `trajlens` command: configuration, pipeline stages
//! run manifests and the synthetic sample city.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod sample;

pub use config::{Config, Loaded, Overrides};
pub use error::CliError;
