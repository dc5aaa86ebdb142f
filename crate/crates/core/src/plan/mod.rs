//! Customized insertion plans.
//!
//! [`register_array`] seats the resting array against the modiolar wall,
//! [`candidate_plans`] derives one trajectory per entry site from that pose,
//! [`emit_plan_text`] renders a plan in the surgeon-facing text format and
//! [`bundle`] packages everything for the 3D viewer. Choosing among the
//! candidates is always left to the surgeon.

pub mod bundle;
mod candidates;
mod clock;
mod register;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, RigidTransform, Vector};
use crate::{Error, Result};

pub use candidates::{candidate_plans, CandidateSet, PlanConfig};
pub use clock::{base_depth, clock_encode, tilt_angle, ClockFace};
pub use register::{register_array, FitReport, Registration, RegistrationConfig};
pub use text::emit_plan_text;

/// Over-insertion beyond the final base depth for the pull-back technique.
pub const OVERINSERT_MM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryKind {
    RwCenter,
    SlightExtendedRw,
    SubstantialExtendedRw,
}

impl EntryKind {
    pub const ALL: [EntryKind; 3] = [
        EntryKind::RwCenter,
        EntryKind::SlightExtendedRw,
        EntryKind::SubstantialExtendedRw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::RwCenter => "RW_CENTER",
            EntryKind::SlightExtendedRw => "SLIGHT_EXTENDED_RW",
            EntryKind::SubstantialExtendedRw => "SUBSTANTIAL_EXTENDED_RW",
        }
    }

    /// Name used in the text plan.
    pub fn display_name(self) -> &'static str {
        match self {
            EntryKind::RwCenter => "RW Center",
            EntryKind::SlightExtendedRw => "Slightly Extended RW",
            EntryKind::SubstantialExtendedRw => "Substantially Extended RW",
        }
    }

    /// Short name for file names and command-line flags.
    pub fn short_name(self) -> &'static str {
        match self {
            EntryKind::RwCenter => "center",
            EntryKind::SlightExtendedRw => "slight",
            EntryKind::SubstantialExtendedRw => "substantial",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryKind {
    type Err = Error;

    /// Accepts the canonical names and the short names, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        EntryKind::ALL
            .into_iter()
            .find(|k| lower == k.short_name() || lower == k.as_str().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown entry kind `{s}`; expected center, slight or substantial"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntrySite {
    pub kind: EntryKind,
    pub point: Point,
}

/// One candidate trajectory with everything the surgeon is told about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPlan {
    pub entry: EntrySite,
    /// Unit insertion direction, pointing into the cochlea.
    pub vector: Vector,
    pub clearance_fn: f64,
    pub clearance_chorda: f64,
    pub clearance_ossicles: f64,
    pub tilt_deg: f64,
    pub curl_clock: ClockFace,
    /// Position of the entry on the round-window clock face; `None` for the
    /// round-window centre itself.
    pub entry_clock: Option<ClockFace>,
    /// Final signed depth of the middle marker past the round-window plane.
    pub base_depth: f64,
    pub overinsert_depth: f64,
    pub registered_pose: RigidTransform,
    pub predicted_aid: f64,
    pub predicted_mmd: f64,
}

impl InsertionPlan {
    /// Where the trajectory line crosses the round-window plane.
    pub fn rw_intersection(&self, rw_center: &Point, rw_normal: &Vector) -> Result<Point> {
        clock::line_plane_intersection(&self.entry.point, &self.vector, rw_center, rw_normal)
    }

    /// Same plan in a rigidly moved coordinate system.
    pub fn transformed(&self, t: &RigidTransform) -> InsertionPlan {
        InsertionPlan {
            entry: EntrySite {
                kind: self.entry.kind,
                point: t.apply_point(&self.entry.point),
            },
            vector: t.apply_vector(&self.vector),
            registered_pose: t.compose(&self.registered_pose),
            ..self.clone()
        }
    }
}

/// Surgeon's choice among the candidates, as written by the viewer or the
/// command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRecord {
    pub case_id: String,
    pub selected_entry_kind: EntryKind,
    /// RFC 3339 UTC timestamp.
    pub timestamp: String,
}

impl SelectionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.case_id.trim().is_empty() {
            return Err(Error::InvalidParameter("selection case_id is empty".into()));
        }
        if !is_rfc3339_utc(&self.timestamp) {
            return Err(Error::InvalidParameter(format!(
                "selection timestamp `{}` is not an RFC 3339 UTC time",
                self.timestamp
            )));
        }
        Ok(())
    }
}

/// `YYYY-MM-DDTHH:MM:SS[.fff]Z`.
fn is_rfc3339_utc(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 20 || b[b.len() - 1] != b'Z' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    let fixed = digits(0..4)
        && b[4] == b'-'
        && digits(5..7)
        && b[7] == b'-'
        && digits(8..10)
        && b[10] == b'T'
        && digits(11..13)
        && b[13] == b':'
        && digits(14..16)
        && b[16] == b':'
        && digits(17..19);
    let frac = &b[19..b.len() - 1];
    fixed
        && (frac.is_empty()
            || (frac.len() >= 2 && frac[0] == b'.' && frac[1..].iter().all(u8::is_ascii_digit)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_kind_names() {
        assert_eq!(
            "substantial".parse::<EntryKind>().unwrap(),
            EntryKind::SubstantialExtendedRw
        );
        assert_eq!(
            "RW_CENTER".parse::<EntryKind>().unwrap(),
            EntryKind::RwCenter
        );
        assert!("middle".parse::<EntryKind>().is_err());
        assert_eq!(
            serde_json::to_string(&EntryKind::SlightExtendedRw).unwrap(),
            "\"SLIGHT_EXTENDED_RW\""
        );
    }

    #[test]
    fn selection_record_json() {
        let r: SelectionRecord = serde_json::from_str(
            r#"{"case_id":"case-7","selected_entry_kind":"SUBSTANTIAL_EXTENDED_RW","timestamp":"2026-10-18T09:30:00Z"}"#,
        )
        .unwrap();
        r.validate().unwrap();
        assert_eq!(r.selected_entry_kind, EntryKind::SubstantialExtendedRw);
        let bad = SelectionRecord {
            timestamp: "yesterday".into(),
            ..r
        };
        assert!(bad.validate().is_err());
    }
}
