//! Configuration, file formats and command dispatch for the `normcrit` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;
pub mod jobs;
pub mod json;
