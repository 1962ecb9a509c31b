//! Benchmark driver for the thermoporous solver: case files, permeability
//! fields, metrics output and the Schur condition diagnostic.

pub mod conddiag;
pub mod config;
pub mod error;
pub mod metrics;
pub mod perm;
pub mod runner;

pub use config::{load_case, parse_case, CaseSpec};
pub use error::{Error, Result};
pub use metrics::{summarize, MetricsRecord, Summary};
