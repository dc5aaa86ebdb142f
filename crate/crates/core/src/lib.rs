//! Insertion planning and post-operative evaluation for slim pre-curved
//! cochlear implant electrode arrays.
//!
//! The crate is organised the way the workflow runs:
//!
//! - [`geometry`]: synthetic cochlear anatomy, the cochlear coordinate frame
//!   and exact mesh / tube distance and containment queries.
//! - [`array`]: the resting shape of the electrode array.
//! - [`plan`]: registration of the array to the modiolar wall, the three
//!   entry-site candidates, clock-face encodings, the text plan and the
//!   scene bundle consumed by the viewer.
//! - [`metrics`]: AID, MMD, AMD, scalar location, fold detection and base
//!   depth error of an implanted array.
//! - [`stats`]: cohort ingestion, summaries, hypothesis tests, regression
//!   and power analysis.
//!
//! All lengths are millimetres and all angles degrees unless a name says
//! otherwise.

pub mod array;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod plan;
pub mod stats;

pub use error::{Error, Result};

/// Rounds to `decimals` places, ties to even on the exact binary value,
/// and renders without a negative zero.
pub(crate) fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}
