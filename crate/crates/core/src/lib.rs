//! Ground-truth-free quality control for AI-generated volumetric label masks.
//!
//! The crate reads label masks (a strict NRRD subset plus a JSON sidecar),
//! measures each segment, applies four geometric checks (completeness,
//! single connected component, laterality, minimum volume) and aggregates
//! the resulting per-segment records into cohort-level consistency
//! analytics. A phantom generator produces cohorts with a ground-truth log
//! of injected defects for end-to-end validation.
//!
//! World coordinates are LPS throughout: +x points to the patient's left.

pub mod cohort;
pub mod components;
pub mod error;
pub mod features;
pub mod geometry;
pub mod heuristics;
pub mod io;
pub mod mixed;
pub mod nrrd;
pub mod phantom;
pub mod stats;
pub mod volume;

#[cfg(test)]
mod test_util;

pub use components::Connectivity;
pub use error::{Error, Result};
pub use geometry::VolumeGeometry;
pub use heuristics::{
    evaluate_series, HeuristicConfig, Heuristic, LateralityOutcome, Measurements, SegmentQCRecord,
};
pub use volume::{Label, LabelVolume, Laterality, SegmentInfo, SegmentMap, SeriesInfo};
