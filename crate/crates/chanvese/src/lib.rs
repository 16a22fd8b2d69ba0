//! Files and command line for `chanvese-core`: PGM images, JSON
//! checkpoints, CSV logs, dataset directories and the `chanvese` binary.

pub mod atomic;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod logs;
pub mod pgm;
pub mod pipeline;
pub mod verify;

pub use error::{Error, Result};
