//! Synthetic data with known ground truth.
//!
//! [`cohort`] draws ordinal coding tables from per-cell response
//! distributions, [`script`] renders scripted landmark streams together with
//! the trial metrics the pipeline must recover, and [`dataset`] assembles
//! both into a complete study on disk.

pub mod cohort;
pub mod dataset;
pub mod script;

pub use cohort::{gen_ordinal_cohort, CohortCell, CohortProfile, ResponseDist};
pub use dataset::{write_dataset, DatasetFiles, DatasetSpec};
pub use script::{gen_landmark_stream, ground_truth, random_script, template_eye, Blink, FaceSegment, StreamScript};
