//! Command-line driver for the `prae` crate.

pub mod commands;
pub mod experiments;
pub mod model_file;
pub mod presets;
pub mod record;
