use serde::{Deserialize, Serialize};

use super::query::{point_segment_distance, segment_segment_closest};
use super::{Point, RigidTransform, TriMesh, Vector};
use crate::{Error, Result};

/// Polyline with a per-vertex radius, linearly interpolated along each
/// segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTube", into = "RawTube")]
pub struct CenterlineTube {
    centerline: Vec<Point>,
    radius: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTube {
    centerline: Vec<[f64; 3]>,
    radius: Vec<f64>,
}

impl TryFrom<RawTube> for CenterlineTube {
    type Error = Error;

    fn try_from(raw: RawTube) -> Result<Self> {
        CenterlineTube::new(
            raw.centerline.into_iter().map(Point::from).collect(),
            raw.radius,
        )
    }
}

impl From<CenterlineTube> for RawTube {
    fn from(t: CenterlineTube) -> Self {
        RawTube {
            centerline: t.centerline.iter().map(|p| p.coords.into()).collect(),
            radius: t.radius,
        }
    }
}

impl CenterlineTube {
    pub fn new(centerline: Vec<Point>, radius: Vec<f64>) -> Result<Self> {
        if centerline.len() < 2 {
            return Err(Error::InvalidParameter(
                "tube centerline needs at least 2 points".into(),
            ));
        }
        if radius.len() != centerline.len() {
            return Err(Error::LengthMismatch {
                left: centerline.len(),
                right: radius.len(),
            });
        }
        if let Some(r) = radius.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "tube radius must be positive, got {r}"
            )));
        }
        if let Some(i) = centerline
            .windows(2)
            .position(|w| (w[1] - w[0]).norm() <= 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "tube arc length not strictly increasing at point {}",
                i + 1
            )));
        }
        Ok(CenterlineTube { centerline, radius })
    }

    /// Constant-radius tube.
    pub fn uniform(centerline: Vec<Point>, radius: f64) -> Result<Self> {
        let n = centerline.len();
        Self::new(centerline, vec![radius; n])
    }

    pub fn centerline(&self) -> &[Point] {
        &self.centerline
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn transformed(&self, t: &RigidTransform) -> CenterlineTube {
        CenterlineTube {
            centerline: self.centerline.iter().map(|p| t.apply_point(p)).collect(),
            radius: self.radius.clone(),
        }
    }

    /// Distance from segment `ab` to the tube surface, clamped at zero.
    ///
    /// On each centerline segment the clearance `|c(t) - ab| - r(t)` is convex
    /// in `t` (a convex distance minus a linear radius), so golden-section
    /// search finds its exact minimum.
    pub fn distance_to_segment(&self, a: &Point, b: &Point) -> Result<f64> {
        if (b - a).norm() <= 0.0 {
            return Err(Error::InvalidParameter("degenerate query segment".into()));
        }
        let mut best = f64::INFINITY;
        for i in 0..self.centerline.len() - 1 {
            let (c0, c1) = (self.centerline[i], self.centerline[i + 1]);
            let (r0, r1) = (self.radius[i], self.radius[i + 1]);
            let lower = segment_segment_closest(&c0, &c1, a, b).2 - r0.max(r1);
            if lower >= best {
                continue;
            }
            let g =
                |t: f64| point_segment_distance(&(c0 + (c1 - c0) * t), a, b) - (r0 + (r1 - r0) * t);
            best = best.min(golden_min(g));
            if best <= 0.0 {
                return Ok(0.0);
            }
        }
        Ok(best.max(0.0))
    }

    /// Distance from a point to the tube surface, clamped at zero.
    pub fn distance_to_point(&self, p: &Point) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.centerline.len() - 1 {
            let (c0, c1) = (self.centerline[i], self.centerline[i + 1]);
            let (r0, r1) = (self.radius[i], self.radius[i + 1]);
            let g = |t: f64| (p - (c0 + (c1 - c0) * t)).norm() - (r0 + (r1 - r0) * t);
            best = best.min(golden_min(g));
        }
        best.max(0.0)
    }

    /// Closed surface mesh of the tube with end caps.
    pub fn to_mesh(&self, label: &str, segments: usize) -> Result<TriMesh> {
        sweep_tube(label, &self.centerline, &self.radius, None, segments)
    }
}

/// Minimum of a convex function on `[0, 1]`.
fn golden_min(f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(0.0)).min(f(1.0))
}

/// Sweeps circular cross-sections along `centers` into a closed, outward
/// oriented mesh.
///
/// Ring `i` vertex `j` has index `i * segments + j` and sits at angle
/// `2πj / segments` measured from the ring's first basis vector towards its
/// second. The two cap centres follow the rings. When `basis` is `None` the
/// rings are oriented by parallel transport.
pub fn sweep_tube(
    label: &str,
    centers: &[Point],
    radii: &[f64],
    basis: Option<&[(Vector, Vector)]>,
    segments: usize,
) -> Result<TriMesh> {
    let n = centers.len();
    if n < 2 || radii.len() != n || segments < 3 {
        return Err(Error::InvalidParameter(format!(
            "{label}: cannot sweep {n} rings of {segments} segments"
        )));
    }
    let frames = match basis {
        Some(b) if b.len() == n => b.to_vec(),
        Some(b) => {
            return Err(Error::LengthMismatch {
                left: n,
                right: b.len(),
            })
        }
        None => parallel_transport(centers)?,
    };
    let mut vertices = Vec::with_capacity(n * segments + 2);
    for i in 0..n {
        let (e1, e2) = frames[i];
        for j in 0..segments {
            let beta = std::f64::consts::TAU * j as f64 / segments as f64;
            vertices.push(centers[i] + (e1 * beta.cos() + e2 * beta.sin()) * radii[i]);
        }
    }
    let ring = |i: usize, j: usize| (i * segments + j % segments) as u32;
    let mut triangles = Vec::with_capacity(2 * n * segments);
    for i in 0..n - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (
                ring(i, j),
                ring(i, j + 1),
                ring(i + 1, j + 1),
                ring(i + 1, j),
            );
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let start = vertices.len() as u32;
    vertices.push(centers[0]);
    vertices.push(centers[n - 1]);
    for j in 0..segments {
        triangles.push([start, ring(0, j + 1), ring(0, j)]);
        triangles.push([start + 1, ring(n - 1, j), ring(n - 1, j + 1)]);
    }
    TriMesh::new(label, vertices, triangles)
}

/// Unit tangents by central differences.
pub(crate) fn tangents(centers: &[Point]) -> Vec<Vector> {
    let n = centers.len();
    (0..n)
        .map(|i| {
            let a = centers[i.saturating_sub(1)];
            let b = centers[(i + 1).min(n - 1)];
            (b - a).normalize()
        })
        .collect()
}

fn parallel_transport(centers: &[Point]) -> Result<Vec<(Vector, Vector)>> {
    let t = tangents(centers);
    let seed = if t[0].x.abs() < 0.9 {
        Vector::x()
    } else {
        Vector::y()
    };
    let mut e1 = (seed - t[0] * seed.dot(&t[0])).normalize();
    let mut out = Vec::with_capacity(centers.len());
    for ti in &t {
        let proj = e1 - ti * e1.dot(ti);
        if proj.norm() < 1e-9 {
            return Err(Error::InvalidParameter(
                "tube centerline reverses direction".into(),
            ));
        }
        e1 = proj.normalize();
        out.push((e1, ti.cross(&e1)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(r: f64) -> CenterlineTube {
        CenterlineTube::uniform(
            vec![Point::new(0.0, 0.0, -5.0), Point::new(0.0, 0.0, 5.0)],
            r,
        )
        .unwrap()
    }

    #[test]
    fn parallel_offset() {
        let t = straight(0.4);
        let d = t
            .distance_to_segment(&Point::new(2.4, 0.0, -1.0), &Point::new(2.4, 0.0, 1.0))
            .unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn touching_and_crossing() {
        let t = straight(0.5);
        let d = t
            .distance_to_segment(&Point::new(0.5, -3.0, 0.0), &Point::new(0.5, 3.0, 0.0))
            .unwrap();
        assert!(d.abs() < 1e-12);
        let d = t
            .distance_to_segment(&Point::new(-3.0, 0.0, 0.0), &Point::new(3.0, 0.0, 0.0))
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn invalid_tubes() {
        assert!(CenterlineTube::uniform(vec![Point::origin()], 1.0).is_err());
        assert!(CenterlineTube::uniform(vec![Point::origin(), Point::origin()], 1.0).is_err());
        assert!(
            CenterlineTube::uniform(vec![Point::origin(), Point::new(1.0, 0.0, 0.0)], 0.0).is_err()
        );
        assert!(straight(1.0)
            .distance_to_segment(&Point::origin(), &Point::origin())
            .is_err());
    }

    #[test]
    fn swept_mesh_is_closed() {
        let c: Vec<Point> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.2;
                Point::new(3.0 * a.cos(), 3.0 * a.sin(), 0.3 * a)
            })
            .collect();
        let tube = CenterlineTube::uniform(c, 0.5).unwrap();
        let m = tube.to_mesh("helix", 16).unwrap();
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
        assert!(m.contains(&tube.centerline()[7]).unwrap());
    }
}
