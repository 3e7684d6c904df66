//! Session service and command implementations for the `prefgait` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;
