use serde::{Deserialize, Serialize};

use super::{CenterlineTube, CochlearFrame, Point, RigidTransform, TriMesh, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterlineSample {
    pub point: Point,
    /// Cumulative angle around the modiolar axis.
    pub angle_deg: f64,
    /// Duct radius at this sample.
    pub radius: f64,
}

/// Round-window membrane: a disc centred on `frame.rw_center` in the plane
/// with normal `frame.rw_plane_normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundWindow {
    pub radius: f64,
    /// Unit in-plane direction along which the opening is extended by
    /// drilling.
    pub extension_dir: Vector,
}

/// Segmented anatomy of one ear in a single millimetre coordinate system.
#[derive(Debug, Clone, PartialEq)]
pub struct CochlearScene {
    pub st: TriMesh,
    pub sv: TriMesh,
    pub modiolar_wall: TriMesh,
    pub ossicles: TriMesh,
    pub facial_nerve: CenterlineTube,
    pub chorda: CenterlineTube,
    pub frame: CochlearFrame,
    pub round_window: RoundWindow,
    pub st_centerline: Vec<CenterlineSample>,
}

impl CochlearScene {
    pub fn validate(&self) -> Result<()> {
        for m in [&self.st, &self.sv] {
            if !m.is_watertight() {
                return Err(Error::Topology(format!(
                    "`{}` must be watertight",
                    m.label()
                )));
            }
        }
        for m in [&self.modiolar_wall, &self.ossicles] {
            if m.is_empty() {
                return Err(Error::EmptyGeometry(m.label().to_string()));
            }
        }
        let c = &self.st_centerline;
        if c.len() < 2 {
            return Err(Error::InvalidParameter(
                "st_centerline needs at least 2 samples".into(),
            ));
        }
        if c[0].angle_deg.abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "st_centerline must start at 0 deg, starts at {}",
                c[0].angle_deg
            )));
        }
        if let Some(i) = c.windows(2).position(|w| w[1].angle_deg <= w[0].angle_deg) {
            return Err(Error::InvalidParameter(format!(
                "st_centerline angle not increasing at sample {}",
                i + 1
            )));
        }
        if !(self.round_window.radius > 0.0) {
            return Err(Error::InvalidParameter(
                "round-window radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn transformed(&self, t: &RigidTransform) -> CochlearScene {
        CochlearScene {
            st: self.st.transformed(t),
            sv: self.sv.transformed(t),
            modiolar_wall: self.modiolar_wall.transformed(t),
            ossicles: self.ossicles.transformed(t),
            facial_nerve: self.facial_nerve.transformed(t),
            chorda: self.chorda.transformed(t),
            frame: self.frame.transformed(t),
            round_window: RoundWindow {
                radius: self.round_window.radius,
                extension_dir: t.apply_vector(&self.round_window.extension_dir),
            },
            st_centerline: self
                .st_centerline
                .iter()
                .map(|s| CenterlineSample {
                    point: t.apply_point(&s.point),
                    ..*s
                })
                .collect(),
        }
    }

    /// Total angular extent of the scala tympani centerline.
    pub fn st_extent_deg(&self) -> f64 {
        self.st_centerline.last().map_or(0.0, |s| s.angle_deg)
    }

    /// Centerline point at cumulative angle `deg`, linearly interpolated.
    pub fn st_point_at(&self, deg: f64) -> Option<Point> {
        let c = &self.st_centerline;
        if c.is_empty() || deg < c[0].angle_deg || deg > c[c.len() - 1].angle_deg {
            return None;
        }
        let i = c
            .partition_point(|s| s.angle_deg <= deg)
            .clamp(1, c.len() - 1);
        let (a, b) = (&c[i - 1], &c[i]);
        let t = (deg - a.angle_deg) / (b.angle_deg - a.angle_deg);
        Some(a.point + (b.point - a.point) * t)
    }
}
