pub mod audio;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fixtures;
pub mod fusion;
pub mod ingest;
pub mod label;
pub mod model_file;
pub mod numeric;
pub mod pipeline;
pub mod scoring;
pub mod seed;
pub mod text;
pub mod workflow;

pub use error::{Error, Result};
