//! File formats and the command-line interface for coordinated topic modeling.
//!
//! The numerical work lives in [`ctm_core`]; this crate reads and writes
//! corpora, embeddings, reference topics, priors, checkpoints and reports.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod demo;
mod error;
pub mod formats;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{Error, Result};
