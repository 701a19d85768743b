//! File formats, export and the command-line front end for
//! [`loopforge_core`].

pub mod cli;
pub mod config;
pub mod export;
pub mod formats;
