//! Command-line front end for the `cuechord` pipeline.

pub mod args;
pub mod commands;
pub mod config;
pub mod external;
