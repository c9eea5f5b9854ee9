pub mod baselines;
pub mod catalog;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod viz;
pub mod persist;
pub mod cli;
