//! Initial data, refinement studies, file output and run configuration.

pub mod config;
pub mod convergence;
pub mod init;
pub mod interp;
pub mod output;

pub use convergence::{cauchy_study, cauchy_study_with, StudyReport};
pub use init::{init_benchmark, init_random};
pub use interp::{prolong_bilinear, restrict_average};
