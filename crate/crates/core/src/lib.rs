//! Engagement analytics for response-to-name sessions.
//!
//! The crate turns facial-landmark streams and manual three-point response
//! codes into per-trial engagement metrics (latency, duration, eye-openness)
//! and runs a non-parametric statistical battery over them. Every stage is a
//! pure function over immutable inputs so that a full run is byte-for-byte
//! reproducible for a fixed seed, independent of the worker count.
//!
//! Module map:
//!
//! * [`stream`]: landmark-stream and session-manifest formats and validation
//! * [`geometry`]: face area, eye polygon area, EAR, EOP, gating and smoothing
//! * [`trials`]: trial windows, response onset, latency, duration, trial EOP
//! * [`coding`]: manual ordinal codes, descriptives, reliability, effect sizes
//! * [`stats`]: rank tests, Holm adjustment, Spearman, permutation tests, slopes
//! * [`synth`]: synthetic cohorts and scripted streams with known ground truth
//! * [`report`]: end-to-end pipeline, CSV and SVG emitters

pub mod coding;
pub mod error;
pub mod geometry;
pub mod report;
pub mod stats;
pub mod stream;
pub mod synth;
pub mod trials;
pub mod types;

pub use error::{Error, Result};
pub use types::{Group, Stimulus};
