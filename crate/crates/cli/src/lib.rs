//! Command-line pipeline stages and the live session server.

pub mod args;
pub mod atomic;
pub mod commands;
pub mod frames;
pub mod serve;

pub use args::{Cli, Command};
