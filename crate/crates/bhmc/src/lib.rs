//! File formats, preprocessing and command implementations around
//! [`bhmc_core`].

pub mod commands;
pub mod config;
pub mod dot;
pub mod error;
pub mod export;
pub mod io;
pub mod pca;

pub use commands::{cmd_eval, cmd_export_dot, cmd_fit, cmd_generate, parse_mode, GenerateArgs};
pub use config::{HyperparamsConfig, RunConfig};
pub use error::{CliError, Result};
pub use export::TreeExport;
