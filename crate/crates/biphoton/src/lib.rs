//! File formats, configuration and command implementations for the
//! `biphoton` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
