use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::clock::{base_depth, clock_encode, tilt_angle};
use super::register::{register_array, Registration, RegistrationConfig};
use super::{EntryKind, EntrySite, InsertionPlan, OVERINSERT_MM};
use crate::array::RestingShape;
use crate::geometry::{CochlearScene, Point, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Displacement of each entry site from the round-window centre along
    /// the extension direction, mm, in [`EntryKind::ALL`] order.
    pub entry_displacements: [f64; 3],
    /// Basal centerline span the trajectory is fitted to, degrees.
    pub basal_span_deg: f64,
    /// Length of the approach segment checked for clearance, mm.
    pub approach_length: f64,
    pub registration: RegistrationConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            entry_displacements: [0.0, 0.5, 1.0],
            basal_span_deg: 45.0,
            approach_length: 15.0,
            registration: RegistrationConfig::default(),
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self
            .entry_displacements
            .iter()
            .any(|d| !d.is_finite() || *d < 0.0)
        {
            return Err(Error::InvalidParameter(
                "entry displacements must be finite and >= 0".into(),
            ));
        }
        if !(self.basal_span_deg > 0.0) || !(self.approach_length > 0.0) {
            return Err(Error::InvalidParameter(
                "basal span and approach length must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub registration: Registration,
    /// One plan per entry kind, in [`EntryKind::ALL`] order.
    pub plans: Vec<InsertionPlan>,
}

impl CandidateSet {
    pub fn plan(&self, kind: EntryKind) -> Option<&InsertionPlan> {
        self.plans.iter().find(|p| p.entry.kind == kind)
    }
}

/// Direction of the line through `entry` that best fits `points`, oriented
/// towards them.
fn fit_line_through(entry: &Point, points: &[Point]) -> Result<Vector> {
    let mut m = Matrix3::zeros();
    let mut sum = Vector::zeros();
    for p in points {
        let d = p - entry;
        m += d * d.transpose();
        sum += d;
    }
    let eig = SymmetricEigen::new(m);
    let i = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(i).into_owned();
    let v = v.try_normalize(1e-12).ok_or(Error::DegenerateDirection)?;
    Ok(if v.dot(&sum) < 0.0 { -v } else { v })
}

/// Registers the array and derives one insertion plan per entry site.
pub fn candidate_plans(
    scene: &CochlearScene,
    shape: &RestingShape,
    cfg: &PlanConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    let registration = register_array(scene, shape, &cfg.registration)?;
    let pose = registration.transform;
    let frame = &scene.frame;
    let basal: Vec<Point> = scene
        .st_centerline
        .iter()
        .filter(|s| s.angle_deg <= cfg.basal_span_deg)
        .map(|s| s.point)
        .collect();
    if basal.len() < 2 {
        return Err(Error::EmptyGeometry(
            "basal centerline span holds fewer than 2 samples".into(),
        ));
    }
    let curl = pose.apply_vector(&shape.curl_direction);
    let middle = pose.apply_point(&shape.middle_marker());
    let n = frame.rw_plane_normal;

    let mut plans = Vec::with_capacity(3);
    for (kind, delta) in EntryKind::ALL.into_iter().zip(cfg.entry_displacements) {
        let entry = frame.rw_center + scene.round_window.extension_dir * delta;
        let vector = fit_line_through(&entry, &basal)?;
        let outer = entry - vector * cfg.approach_length;
        let entry_clock = match kind {
            EntryKind::RwCenter => None,
            _ => Some(clock_encode(
                frame,
                &frame.rw_center,
                &(entry - frame.rw_center),
                &-n,
            )?),
        };
        let depth = base_depth(&middle, &entry, &vector, &frame.rw_center, &n)?;
        plans.push(InsertionPlan {
            entry: EntrySite { kind, point: entry },
            vector,
            clearance_fn: scene.facial_nerve.distance_to_segment(&outer, &entry)?,
            clearance_chorda: scene.chorda.distance_to_segment(&outer, &entry)?,
            clearance_ossicles: scene.ossicles.segment_distance(&outer, &entry)?,
            tilt_deg: tilt_angle(&vector, &n),
            curl_clock: clock_encode(frame, &entry, &curl, &vector)?,
            entry_clock,
            base_depth: depth,
            overinsert_depth: depth + OVERINSERT_MM,
            registered_pose: pose,
            predicted_aid: registration.report.predicted_aid,
            predicted_mmd: registration.report.predicted_mmd,
        });
    }
    Ok(CandidateSet {
        registration,
        plans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_through_entry() {
        let e = Point::new(1.0, 1.0, 1.0);
        let d = Vector::new(1.0, 2.0, -2.0).normalize();
        let pts: Vec<Point> = (1..10).map(|i| e + d * i as f64).collect();
        let v = fit_line_through(&e, &pts).unwrap();
        assert!((v - d).norm() < 1e-12);
        let rev: Vec<Point> = (1..10).map(|i| e - d * i as f64).collect();
        assert!((fit_line_through(&e, &rev).unwrap() + d).norm() < 1e-12);
    }
}
