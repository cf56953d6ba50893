//! Experiment harness, file formats and command-line plumbing around
//! [`sdiff_core`].

pub mod error;
pub mod formats;
pub mod harness;
pub mod spec_file;

pub use error::{Error, Result};
