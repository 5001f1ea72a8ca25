//! File formats, experiment configuration and the Monte Carlo harness
//! around [`exindex_core`].

pub mod config;
pub mod error;
pub mod format;
pub mod harness;
pub mod io;
pub mod model_arg;

pub use error::{AppError, AppResult};

/// Crate version with `git describe` appended when built from a checkout.
pub const VERSION: &str = env!("EXINDEX_VERSION");
