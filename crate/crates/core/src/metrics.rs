//! Post-operative electrode position metrics.
//!
//! Contacts are always ordered tip first. Angles run along the contact path
//! from the basal contact towards the tip, measured in the cochlear frame
//! from the round-window reference ray.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::APICAL_CONTACTS;
use crate::geometry::{unwind_angle, CochlearScene, Point};
use crate::{Error, Result};

/// Depth the array is designed to reach, degrees.
pub const IDEAL_AID_DEG: f64 = 450.0;
pub const DEFAULT_FOLD_THRESHOLD_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarLabel {
    #[serde(rename = "ST")]
    St,
    #[serde(rename = "ST/SV")]
    StSv,
}

impl ScalarLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarLabel::St => "ST",
            ScalarLabel::StSv => "ST/SV",
        }
    }
}

impl fmt::Display for ScalarLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalarLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ST" => Ok(ScalarLabel::St),
            "ST/SV" | "ST_SV" => Ok(ScalarLabel::StSv),
            other => Err(Error::InvalidParameter(format!(
                "unknown scalar label `{other}`"
            ))),
        }
    }
}

/// Where a single contact sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContactLocation {
    St,
    Sv,
    /// Neither scala; counts as a translocation.
    Outside,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarClassification {
    pub label: ScalarLabel,
    /// One entry per contact, tip first.
    pub contacts: Vec<ContactLocation>,
}

/// Metrics reported directly by a table or an external pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precomputed {
    pub aid_deg: f64,
    pub mmd_mm: f64,
    pub amd_mm: f64,
    pub scalar_label: ScalarLabel,
    pub fold_flag: bool,
    #[serde(default)]
    pub d_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostOpRecord {
    pub case_id: String,
    #[serde(default)]
    pub contact_centers: Option<Vec<Point>>,
    #[serde(default)]
    pub planned_base_depth: Option<f64>,
    #[serde(default)]
    pub actual_base_depth: Option<f64>,
    #[serde(default)]
    pub precomputed: Option<Precomputed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionMetrics {
    pub case_id: String,
    pub aid_deg: f64,
    /// `aid_deg - 450`.
    pub aid_error_deg: f64,
    pub mmd_mm: f64,
    pub amd_mm: f64,
    pub scalar_label: ScalarLabel,
    pub fold: bool,
    pub d_mm: Option<f64>,
    /// Largest cumulative angle reached by any contact; only available when
    /// contact coordinates are given.
    pub max_extent_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub fold_threshold_deg: f64,
    /// Agreement required between precomputed and derived angles, degrees.
    pub angle_tolerance_deg: f64,
    /// Agreement required between precomputed and derived distances, mm.
    pub distance_tolerance_mm: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            fold_threshold_deg: DEFAULT_FOLD_THRESHOLD_DEG,
            angle_tolerance_deg: 1.0,
            distance_tolerance_mm: 0.01,
        }
    }
}

fn need(contacts: &[Point], n: usize) -> Result<()> {
    if contacts.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need at least {n} contacts, got {}",
            contacts.len()
        )));
    }
    Ok(())
}

/// Cumulative angles of the contacts, basal contact first.
pub fn contact_angles(scene: &CochlearScene, contacts: &[Point]) -> Result<Vec<f64>> {
    let base_to_tip: Vec<Point> = contacts.iter().rev().copied().collect();
    unwind_angle(&scene.frame, &base_to_tip)
}

/// Angular insertion depth: cumulative angle of the tip contact.
pub fn compute_aid(scene: &CochlearScene, contacts: &[Point]) -> Result<f64> {
    need(contacts, 2)?;
    Ok(*contact_angles(scene, contacts)?.last().unwrap())
}

fn mean_wall_distance(scene: &CochlearScene, contacts: &[Point]) -> Result<f64> {
    need(contacts, 1)?;
    let mut sum = 0.0;
    for p in contacts {
        sum += scene.modiolar_wall.distance(p)?;
    }
    Ok(sum / contacts.len() as f64)
}

/// Mean modiolar distance over all contacts.
pub fn compute_mmd(scene: &CochlearScene, contacts: &[Point]) -> Result<f64> {
    mean_wall_distance(scene, contacts)
}

/// Mean modiolar distance over the 11 most apical contacts, or over all of
/// them when there are fewer.
pub fn compute_amd(scene: &CochlearScene, contacts: &[Point]) -> Result<f64> {
    mean_wall_distance(scene, &contacts[..contacts.len().min(APICAL_CONTACTS)])
}

pub fn classify_scalar(scene: &CochlearScene, contacts: &[Point]) -> Result<ScalarClassification> {
    need(contacts, 1)?;
    let mut labels = Vec::with_capacity(contacts.len());
    for p in contacts {
        labels.push(if scene.st.contains(p)? {
            ContactLocation::St
        } else if scene.sv.contains(p)? {
            ContactLocation::Sv
        } else {
            ContactLocation::Outside
        });
    }
    let label = if labels.iter().all(|l| *l == ContactLocation::St) {
        ScalarLabel::St
    } else {
        ScalarLabel::StSv
    };
    Ok(ScalarClassification {
        label,
        contacts: labels,
    })
}

/// True when the base-to-tip angle sequence falls more than `threshold_deg`
/// below its running maximum.
pub fn is_folded(angles: &[f64], threshold_deg: f64) -> bool {
    let mut peak = f64::NEG_INFINITY;
    for &a in angles {
        peak = peak.max(a);
        if peak - a > threshold_deg {
            return true;
        }
    }
    false
}

pub fn detect_fold(scene: &CochlearScene, contacts: &[Point], threshold_deg: f64) -> Result<bool> {
    need(contacts, 3)?;
    Ok(is_folded(&contact_angles(scene, contacts)?, threshold_deg))
}

/// `actual - planned`; negative when the array ended up shallower.
pub fn base_depth_error(planned: Option<f64>, actual: Option<f64>) -> Result<f64> {
    match (planned, actual) {
        (Some(p), Some(a)) => Ok(a - p),
        (None, _) => Err(Error::MissingData("planned base depth".into())),
        (_, None) => Err(Error::MissingData("actual base depth".into())),
    }
}

/// Derives every metric from contact coordinates.
pub fn derive_metrics(
    scene: &CochlearScene,
    case_id: &str,
    contacts: &[Point],
    cfg: &MetricsConfig,
) -> Result<PositionMetrics> {
    need(contacts, 3)?;
    let angles = contact_angles(scene, contacts)?;
    let aid = *angles.last().unwrap();
    Ok(PositionMetrics {
        case_id: case_id.to_string(),
        aid_deg: aid,
        aid_error_deg: aid - IDEAL_AID_DEG,
        mmd_mm: compute_mmd(scene, contacts)?,
        amd_mm: compute_amd(scene, contacts)?,
        scalar_label: classify_scalar(scene, contacts)?.label,
        fold: is_folded(&angles, cfg.fold_threshold_deg),
        d_mm: None,
        max_extent_deg: Some(angles.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    })
}

impl PostOpRecord {
    fn depth_error(&self) -> Option<f64> {
        base_depth_error(self.planned_base_depth, self.actual_base_depth).ok()
    }

    /// Metrics for this record. Precomputed values are used when present;
    /// otherwise they are derived from the contacts, which needs `scene`.
    pub fn evaluate(
        &self,
        scene: Option<&CochlearScene>,
        cfg: &MetricsConfig,
    ) -> Result<PositionMetrics> {
        if let Some(p) = &self.precomputed {
            let max_extent_deg = match (scene, &self.contact_centers) {
                (Some(s), Some(c)) => Some(
                    contact_angles(s, c)?
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max),
                ),
                _ => None,
            };
            return Ok(PositionMetrics {
                case_id: self.case_id.clone(),
                aid_deg: p.aid_deg,
                aid_error_deg: p.aid_deg - IDEAL_AID_DEG,
                mmd_mm: p.mmd_mm,
                amd_mm: p.amd_mm,
                scalar_label: p.scalar_label,
                fold: p.fold_flag,
                d_mm: p.d_mm.or_else(|| self.depth_error()),
                max_extent_deg,
            });
        }
        let contacts = self.contact_centers.as_deref().ok_or_else(|| {
            Error::MissingData(format!(
                "{}: no contacts and no precomputed metrics",
                self.case_id
            ))
        })?;
        let scene = scene.ok_or_else(|| {
            Error::MissingData(format!(
                "{}: a scene is needed to derive metrics",
                self.case_id
            ))
        })?;
        let mut m = derive_metrics(scene, &self.case_id, contacts, cfg)?;
        m.d_mm = self.depth_error();
        Ok(m)
    }

    /// Checks that the record is usable and, when both contacts and
    /// precomputed values are given, that they agree.
    pub fn validate(&self, scene: Option<&CochlearScene>, cfg: &MetricsConfig) -> Result<()> {
        if self.case_id.trim().is_empty() {
            return Err(Error::InvalidParameter("record case_id is empty".into()));
        }
        if self.contact_centers.is_none() && self.precomputed.is_none() {
            return Err(Error::MissingData(format!(
                "{}: no contacts and no precomputed metrics",
                self.case_id
            )));
        }
        if let (Some(p), Some(d)) = (&self.precomputed, self.depth_error()) {
            if let Some(pd) = p.d_mm {
                if (pd - d).abs() > cfg.distance_tolerance_mm {
                    return Err(mismatch(&self.case_id, "d_mm", pd, d));
                }
            }
        }
        let (Some(p), Some(c), Some(scene)) = (&self.precomputed, &self.contact_centers, scene)
        else {
            return Ok(());
        };
        let m = derive_metrics(scene, &self.case_id, c, cfg)?;
        let checks = [
            ("aid_deg", p.aid_deg, m.aid_deg, cfg.angle_tolerance_deg),
            ("mmd_mm", p.mmd_mm, m.mmd_mm, cfg.distance_tolerance_mm),
            ("amd_mm", p.amd_mm, m.amd_mm, cfg.distance_tolerance_mm),
        ];
        for (name, given, derived, tol) in checks {
            if (given - derived).abs() > tol {
                return Err(mismatch(&self.case_id, name, given, derived));
            }
        }
        if p.scalar_label != m.scalar_label {
            return Err(Error::Format(format!(
                "{}: scalar label {} disagrees with contacts ({})",
                self.case_id, p.scalar_label, m.scalar_label
            )));
        }
        if p.fold_flag != m.fold {
            return Err(Error::Format(format!(
                "{}: fold flag disagrees with contacts",
                self.case_id
            )));
        }
        Ok(())
    }
}

fn mismatch(case: &str, name: &str, given: f64, derived: f64) -> Error {
    Error::Format(format!(
        "{case}: {name} {given} disagrees with derived {derived}"
    ))
}

#[derive(Serialize)]
struct ReportRow<'a> {
    case_id: &'a str,
    d_mm: Option<String>,
    scalar: &'static str,
    fold: &'static str,
    aid_deg: String,
    aid_error_deg: String,
    mmd_mm: String,
    amd_mm: String,
    max_extent_deg: Option<String>,
}

/// Per-case CSV: AID in whole degrees, distances with two decimals.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[PositionMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(format!("metrics csv: {e}"));
    for m in rows {
        w.serialize(ReportRow {
            case_id: &m.case_id,
            d_mm: m.d_mm.map(|d| format!("{d:.2}")),
            scalar: m.scalar_label.as_str(),
            fold: if m.fold { "Y" } else { "N" },
            aid_deg: format!("{:.0}", m.aid_deg),
            aid_error_deg: format!("{:.0}", m.aid_error_deg),
            mmd_mm: format!("{:.2}", m.mmd_mm),
            amd_mm: format!("{:.2}", m.amd_mm),
            max_extent_deg: m.max_extent_deg.map(|a| format!("{a:.0}")),
        })
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("metrics csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_signature() {
        let monotone: Vec<f64> = (0..20).map(|i| i as f64 * 25.0).collect();
        assert!(!is_folded(&monotone, 30.0));
        let folded = [0.0, 100.0, 200.0, 300.0, 250.0, 200.0];
        assert!(is_folded(&folded, 30.0));
        let jitter = [0.0, 100.0, 200.0, 190.0, 250.0];
        assert!(!is_folded(&jitter, 30.0));
    }

    #[test]
    fn depth_error_sign() {
        assert!((base_depth_error(Some(0.0), Some(-1.7)).unwrap() + 1.7).abs() < 1e-12);
        assert_eq!(base_depth_error(Some(0.4), Some(0.4)).unwrap(), 0.0);
        assert!((base_depth_error(Some(-0.5), Some(2.2)).unwrap() - 2.7).abs() < 1e-12);
        assert!(matches!(
            base_depth_error(None, Some(1.0)),
            Err(Error::MissingData(_))
        ));
    }

    #[test]
    fn precomputed_record_wins() {
        let r = PostOpRecord {
            case_id: "tb-12".into(),
            contact_centers: None,
            planned_base_depth: Some(0.0),
            actual_base_depth: Some(-1.7),
            precomputed: Some(Precomputed {
                aid_deg: 394.0,
                mmd_mm: 0.25,
                amd_mm: 0.18,
                scalar_label: ScalarLabel::St,
                fold_flag: false,
                d_mm: None,
            }),
        };
        let cfg = MetricsConfig::default();
        r.validate(None, &cfg).unwrap();
        let m = r.evaluate(None, &cfg).unwrap();
        assert_eq!(m.aid_error_deg, -56.0);
        assert!((m.d_mm.unwrap() + 1.7).abs() < 1e-12);
        let empty = PostOpRecord {
            precomputed: None,
            ..r
        };
        assert!(matches!(
            empty.validate(None, &cfg),
            Err(Error::MissingData(_))
        ));
    }

    #[test]
    fn scalar_label_text() {
        assert_eq!("ST/SV".parse::<ScalarLabel>().unwrap(), ScalarLabel::StSv);
        assert_eq!(
            serde_json::to_string(&ScalarLabel::StSv).unwrap(),
            "\"ST/SV\""
        );
    }
}
