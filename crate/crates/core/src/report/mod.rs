//! End-to-end runs: configuration, the analysis tables, plots and the
//! atomic output writer.

pub mod config;
pub mod format;
pub mod pipeline;
pub mod svg;
pub mod tables;

pub use config::{Profiles, RunConfig, DEFAULT_N_PERM, THREADS_ENV};
pub use pipeline::{run_pipeline, run_stage, OutputFile, RunSummary, Stage, RUN_MANIFEST};
pub use tables::Analysis;
