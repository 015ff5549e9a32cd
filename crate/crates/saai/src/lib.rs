//! Streaming airborne optical sectioning: dataset I/O, the frame pipeline,
//! the command line and the HTTP service around `saai-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geodetic;
pub mod imageio;
pub mod pipeline;
pub mod process;
pub mod service;

pub use error::{Error, Result};
