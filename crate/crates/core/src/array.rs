//! Resting-state model of a slim pre-curved electrode array.
//!
//! The active part is a planar logarithmic spiral: it starts at the most
//! basal contact and curls `design_curl` degrees while its radius shrinks to
//! `tip_taper` of the basal radius. A straight lead continues proximally from
//! the basal contact and carries the three depth markers.
//!
//! Local coordinates: the spiral centre is the origin, the array lies in the
//! `z = 0` plane, the basal contact sits on `+x`, and the spiral winds
//! counter-clockwise about `+z`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, RigidTransform, Vector};
use crate::{Error, Result};

/// Number of contacts counted as apical for AMD.
pub const APICAL_CONTACTS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySpec {
    pub contact_count: usize,
    /// Arc length from the most basal to the most apical contact, mm.
    pub active_length: f64,
    /// Total curl of the active part, degrees.
    pub design_curl: f64,
    /// Arc-length offsets of the three markers proximal to the basal contact,
    /// nearest first.
    pub marker_offsets: [f64; 3],
    /// Ratio of tip to basal curl radius.
    pub tip_taper: f64,
    /// Straight lead beyond the outermost marker, mm.
    pub lead_length: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec {
            contact_count: 22,
            active_length: 13.9,
            design_curl: 450.0,
            marker_offsets: [0.5, 1.0, 1.5],
            tip_taper: 0.42,
            lead_length: 2.0,
        }
    }
}

impl ArraySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.contact_count < 2 {
            return bad(format!(
                "contact_count must be at least 2, got {}",
                self.contact_count
            ));
        }
        if !(self.active_length > 0.0 && self.active_length.is_finite()) {
            return bad(format!(
                "active_length must be positive, got {}",
                self.active_length
            ));
        }
        if !(self.design_curl > 0.0 && self.design_curl.is_finite()) {
            return bad(format!(
                "design_curl must be positive, got {}",
                self.design_curl
            ));
        }
        let m = self.marker_offsets;
        if !(m[0] > 0.0 && m[0] < m[1] && m[1] < m[2] && m[2].is_finite()) {
            return bad(format!(
                "marker_offsets must be positive and strictly increasing, got {m:?}"
            ));
        }
        if !(self.tip_taper > 0.0 && self.tip_taper <= 1.0) {
            return bad(format!(
                "tip_taper must lie in (0, 1], got {}",
                self.tip_taper
            ));
        }
        if !(self.lead_length >= 0.0 && self.lead_length.is_finite()) {
            return bad(format!(
                "lead_length must be non-negative, got {}",
                self.lead_length
            ));
        }
        Ok(())
    }
}

/// Sampled array geometry, resting or posed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestingShape {
    /// Polyline from the proximal end of the lead to the tip.
    pub centerline: Vec<Point>,
    /// Contact centres, most apical first.
    pub contact_centers: Vec<Point>,
    /// Index into `centerline` of each contact centre.
    pub contact_vertex: Vec<usize>,
    /// Arc length of each contact from the basal contact, tip first.
    pub contact_arc: Vec<f64>,
    /// Marker points, nearest the basal contact first; `[1]` is the middle
    /// marker and `[2]` the proximal one.
    pub marker_points: [Point; 3],
    /// Indices into `contact_centers` of the apical contacts.
    pub apical_index_set: Vec<usize>,
    /// Unit normal of the array plane.
    pub plane_normal: Vector,
    /// Unit in-plane direction from the basal contact towards the curl centre.
    pub curl_direction: Vector,
    /// Unit tangent at the basal contact pointing towards the tip.
    pub insertion_tangent: Vector,
}

/// Polyline samples per inter-contact interval; keeps chord-length error of
/// each interval below 1e-6 mm at default curvature.
const SAMPLES_PER_INTERVAL: usize = 256;

pub fn build_resting_shape(spec: &ArraySpec) -> Result<RestingShape> {
    spec.validate()?;
    let psi = spec.design_curl.to_radians();
    let k = -spec.tip_taper.ln() / psi;
    let stretch = (1.0 + k * k).sqrt();
    let a = if k > 0.0 {
        spec.active_length * k / (stretch * (1.0 - spec.tip_taper))
    } else {
        spec.active_length / psi
    };
    let phi_at = |s: f64| -> f64 {
        if k > 0.0 {
            -(1.0 - s * k / (a * stretch)).ln() / k
        } else {
            s / a
        }
    };
    let at = |phi: f64| -> Point {
        let r = a * (-k * phi).exp();
        Point::new(r * phi.cos(), r * phi.sin(), 0.0)
    };
    let tangent0 = Vector::new(-k, 1.0, 0.0).normalize();
    let base = at(0.0);

    let n = spec.contact_count;
    let spacing = spec.active_length / (n - 1) as f64;
    let marker_points = spec.marker_offsets.map(|m| base - tangent0 * m);
    let mut centerline = vec![base - tangent0 * (spec.marker_offsets[2] + spec.lead_length)];
    if spec.lead_length == 0.0 {
        centerline.clear();
    }
    centerline.extend(marker_points.iter().rev());
    let mut vertex_of_basal_first = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let (s0, s1) = (spacing * (i - 1) as f64, spacing * i as f64);
            for j in 1..SAMPLES_PER_INTERVAL {
                let s = s0 + (s1 - s0) * j as f64 / SAMPLES_PER_INTERVAL as f64;
                centerline.push(at(phi_at(s)));
            }
        }
        let s = if i == n - 1 {
            spec.active_length
        } else {
            spacing * i as f64
        };
        vertex_of_basal_first.push(centerline.len());
        centerline.push(at(phi_at(s)));
    }
    let contact_vertex: Vec<usize> = vertex_of_basal_first.into_iter().rev().collect();
    let contact_centers = contact_vertex.iter().map(|&v| centerline[v]).collect();
    let contact_arc = (0..n)
        .rev()
        .map(|i| {
            if i == n - 1 {
                spec.active_length
            } else {
                spacing * i as f64
            }
        })
        .collect();
    Ok(RestingShape {
        centerline,
        contact_centers,
        contact_vertex,
        contact_arc,
        marker_points,
        apical_index_set: (0..APICAL_CONTACTS.min(n)).collect(),
        plane_normal: Vector::z(),
        curl_direction: Vector::new(-1.0, -k, 0.0).normalize(),
        insertion_tangent: tangent0,
    })
}

impl RestingShape {
    pub fn posed(&self, t: &RigidTransform) -> RestingShape {
        RestingShape {
            centerline: self.centerline.iter().map(|p| t.apply_point(p)).collect(),
            contact_centers: self
                .contact_centers
                .iter()
                .map(|p| t.apply_point(p))
                .collect(),
            contact_vertex: self.contact_vertex.clone(),
            contact_arc: self.contact_arc.clone(),
            marker_points: self.marker_points.map(|p| t.apply_point(&p)),
            apical_index_set: self.apical_index_set.clone(),
            plane_normal: t.apply_vector(&self.plane_normal),
            curl_direction: t.apply_vector(&self.curl_direction),
            insertion_tangent: t.apply_vector(&self.insertion_tangent),
        }
    }

    pub fn basal_contact(&self) -> Point {
        self.contact_centers[self.contact_centers.len() - 1]
    }

    pub fn tip_contact(&self) -> Point {
        self.contact_centers[0]
    }

    pub fn middle_marker(&self) -> Point {
        self.marker_points[1]
    }

    pub fn proximal_marker(&self) -> Point {
        self.marker_points[2]
    }

    /// Contacts ordered from base to tip.
    pub fn contacts_base_to_tip(&self) -> Vec<Point> {
        self.contact_centers.iter().rev().copied().collect()
    }

    /// Total turning of the centerline tangent, degrees.
    pub fn cumulative_turn(&self) -> f64 {
        self.centerline
            .windows(3)
            .map(|w| {
                let (u, v) = (w[1] - w[0], w[2] - w[1]);
                u.cross(&v).norm().atan2(u.dot(&v))
            })
            .sum::<f64>()
            .to_degrees()
    }

    /// Arc length along the centerline between two of its vertices.
    pub fn polyline_length(&self, from: usize, to: usize) -> f64 {
        let (a, b) = (from.min(to), from.max(to));
        self.centerline[a..=b]
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Applies a rotation matrix and translation after checking they form a
/// proper rigid motion.
pub fn pose_shape(
    shape: &RestingShape,
    rotation: &Matrix3<f64>,
    translation: &Vector,
) -> Result<RestingShape> {
    let t = RigidTransform::new(*rotation, *translation)?;
    Ok(shape.posed(&t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_curls_450() {
        let s = build_resting_shape(&ArraySpec::default()).unwrap();
        assert!(
            (s.cumulative_turn() - 450.0).abs() < 1.0,
            "{}",
            s.cumulative_turn()
        );
        assert_eq!(s.contact_centers.len(), 22);
        assert_eq!(s.apical_index_set, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn two_contacts_sit_at_arc_ends() {
        let spec = ArraySpec {
            contact_count: 2,
            ..Default::default()
        };
        let s = build_resting_shape(&spec).unwrap();
        assert_eq!(s.contact_centers.len(), 2);
        assert_eq!(s.contact_arc, vec![spec.active_length, 0.0]);
        // one interval spans the whole curl, so the chords fall short a little
        let len = s.polyline_length(s.contact_vertex[1], s.contact_vertex[0]);
        assert!((len - spec.active_length).abs() < 1e-3);
        assert_eq!(s.apical_index_set.len(), 2);
    }

    #[test]
    fn equal_spacing_along_polyline() {
        let s = build_resting_shape(&ArraySpec::default()).unwrap();
        let gaps: Vec<f64> = s
            .contact_vertex
            .windows(2)
            .map(|w| s.polyline_length(w[1], w[0]))
            .collect();
        let spread = gaps.iter().cloned().fold(f64::MIN, f64::max)
            - gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6, "spread {spread}");
    }

    #[test]
    fn markers_behind_base() {
        let spec = ArraySpec::default();
        let s = build_resting_shape(&spec).unwrap();
        for (m, off) in s.marker_points.iter().zip(spec.marker_offsets) {
            assert!(((m - s.basal_contact()).norm() - off).abs() < 1e-12);
            assert!((m - s.basal_contact()).dot(&s.insertion_tangent) < 0.0);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            ArraySpec {
                contact_count: 1,
                ..Default::default()
            },
            ArraySpec {
                marker_offsets: [0.5, 0.5, 1.0],
                ..Default::default()
            },
            ArraySpec {
                design_curl: 0.0,
                ..Default::default()
            },
        ] {
            assert!(build_resting_shape(&spec).is_err());
        }
    }

    #[test]
    fn non_rigid_pose_rejected() {
        let s = build_resting_shape(&ArraySpec::default()).unwrap();
        let shear = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            pose_shape(&s, &shear, &Vector::zeros()),
            Err(Error::NonRigid(_))
        ));
    }
}
