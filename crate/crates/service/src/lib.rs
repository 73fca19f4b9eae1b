//! Review service and command-line driver for a callsent corpus.

pub mod api;
pub mod cli;
