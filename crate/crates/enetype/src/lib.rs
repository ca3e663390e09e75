//! Files, command-line plumbing and training workflow around `enetype-core`.

pub mod ablation;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod parallel;
pub mod pipeline;
pub mod records;
pub mod report;
pub mod store;
pub mod synthetic;
pub mod vectors;

pub use error::{Error, Result};
