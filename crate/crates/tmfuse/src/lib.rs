//! File formats, WAV input, config parsing, parallel helpers and the
//! command line for [`tmfuse_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod fmat;
pub mod model_file;
pub mod numfmt;
pub mod parallel;
pub mod trials;
pub mod wav;

pub use error::{Error, Result};
