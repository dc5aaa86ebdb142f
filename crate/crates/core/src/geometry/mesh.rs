use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use super::bvh::{Aabb, Bvh};
use super::{Point, RigidTransform, Vector};
use crate::{Error, Result};

/// Points this close to a mesh surface count as contained.
pub const SURFACE_TOLERANCE: f64 = 1e-6;

// Generic directions for the parity vote; none is parallel to a coordinate
// plane, so axis-aligned test meshes do not produce edge-grazing hits.
const RAY_DIRECTIONS: [[f64; 3]; 3] = [
    [0.5773502691896258, 0.5590169943749475, 0.5951190084296344],
    [-0.3128689300804617, 0.8090169943749474, 0.4975742080282768],
    [0.1736481776669303, -0.4226182617406994, 0.8895432036020557],
];

/// Triangle mesh with a lazily built, immutable acceleration index.
pub struct TriMesh {
    label: String,
    vertices: Vec<Point>,
    triangles: Vec<[u32; 3]>,
    index: OnceLock<Bvh>,
    watertight: OnceLock<bool>,
}

impl TriMesh {
    /// Validates indices and rejects zero-area triangles.
    pub fn new(
        label: impl Into<String>,
        vertices: Vec<Point>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let label = label.into();
        let n = vertices.len();
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i as usize >= n) {
                return Err(Error::Topology(format!(
                    "{label}: triangle {ti} indexes past {n} vertices"
                )));
            }
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let e1 = b - a;
            let e2 = c - a;
            let scale = e1
                .norm_squared()
                .max(e2.norm_squared())
                .max((c - b).norm_squared());
            if e1.cross(&e2).norm() <= 1e-12 * scale || scale == 0.0 {
                return Err(Error::Topology(format!(
                    "{label}: triangle {ti} is degenerate"
                )));
            }
        }
        if vertices
            .iter()
            .any(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "{label}: non-finite vertex"
            )));
        }
        Ok(TriMesh {
            label,
            vertices,
            triangles,
            index: OnceLock::new(),
            watertight: OnceLock::new(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    fn bvh(&self) -> &Bvh {
        self.index
            .get_or_init(|| Bvh::build(&self.vertices, &self.triangles))
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.triangles.is_empty() {
            Err(Error::EmptyGeometry(format!(
                "mesh `{}` has no triangles",
                self.label
            )))
        } else {
            Ok(())
        }
    }

    pub fn bounds(&self) -> Result<(Point, Point)> {
        self.require_nonempty()?;
        let b: Aabb = self.bvh().bounds();
        Ok((b.min, b.max))
    }

    /// Closed, consistently oriented 2-manifold: every undirected edge is
    /// used by exactly two triangles, once in each direction.
    pub fn is_watertight(&self) -> bool {
        *self.watertight.get_or_init(|| {
            if self.triangles.is_empty() {
                return false;
            }
            let mut edges: HashMap<(u32, u32), i32> =
                HashMap::with_capacity(self.triangles.len() * 3);
            for t in &self.triangles {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    let (key, dir) = if a < b { ((a, b), 1) } else { ((b, a), 16) };
                    *edges.entry(key).or_insert(0) += dir;
                }
            }
            edges.values().all(|&v| v == 17)
        })
    }

    /// Closest surface point, its distance and the triangle it lies on.
    pub fn closest_point(&self, p: &Point) -> Result<(Point, f64, usize)> {
        self.require_nonempty()?;
        Ok(self.bvh().closest_point(&self.vertices, &self.triangles, p))
    }

    pub fn distance(&self, p: &Point) -> Result<f64> {
        Ok(self.closest_point(p)?.1)
    }

    /// Minimum distance between segment `ab` and the surface.
    pub fn segment_distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self
            .bvh()
            .segment_distance(&self.vertices, &self.triangles, a, b))
    }

    /// Inside test by majority vote of three ray-parity counts. Points within
    /// [`SURFACE_TOLERANCE`] of the surface are inside.
    pub fn contains(&self, p: &Point) -> Result<bool> {
        Ok(self.locate(p)?.0)
    }

    /// Inside flag as for [`contains`](Self::contains), with the closest
    /// surface point and its distance.
    pub fn locate(&self, p: &Point) -> Result<(bool, Point, f64)> {
        self.require_nonempty()?;
        if !self.is_watertight() {
            return Err(Error::Topology(format!(
                "mesh `{}` is not watertight",
                self.label
            )));
        }
        let (q, d, _) = self.bvh().closest_point(&self.vertices, &self.triangles, p);
        if d <= SURFACE_TOLERANCE {
            return Ok((true, q, d));
        }
        if self.bvh().bounds().distance_squared(p) > 0.0 {
            return Ok((false, q, d));
        }
        let votes = RAY_DIRECTIONS
            .iter()
            .filter(|d| {
                let dir = Vector::new(d[0], d[1], d[2]);
                self.bvh()
                    .ray_hits(&self.vertices, &self.triangles, p, &dir)
                    .len()
                    % 2
                    == 1
            })
            .count();
        Ok((votes >= 2, q, d))
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            label: self.label.clone(),
            vertices: self.vertices.iter().map(|p| t.apply_point(p)).collect(),
            triangles: self.triangles.clone(),
            index: OnceLock::new(),
            watertight: OnceLock::new(),
        }
    }

    /// Enclosed volume by the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

impl Clone for TriMesh {
    fn clone(&self) -> Self {
        TriMesh {
            label: self.label.clone(),
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            index: self.index.clone(),
            watertight: self.watertight.clone(),
        }
    }
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.vertices == other.vertices
            && self.triangles == other.triangles
    }
}

impl fmt::Debug for TriMesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TriMesh")
            .field("label", &self.label)
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .finish()
    }
}
