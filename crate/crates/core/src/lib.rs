pub mod artifacts;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
