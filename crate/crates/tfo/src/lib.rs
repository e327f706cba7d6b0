//! Files, parallel drivers, experiment pipeline, and command line for
//! [`tfo_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod table_io;
pub mod waveform_io;

pub use error::{Error, Result};
pub use tfo_core;
