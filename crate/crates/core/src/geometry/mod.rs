//! Cochlear geometry: meshes, tubes, the cochlear frame and the synthetic
//! anatomy generator.

mod bvh;
pub mod frame;
pub mod io;
mod mesh;
pub mod query;
mod scene;
pub mod synth;
mod transform;
mod tube;

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;

pub use frame::{angular_coordinate, unwind_angle, CochlearFrame, Winding};
pub use mesh::{TriMesh, SURFACE_TOLERANCE};
pub use scene::{CenterlineSample, CochlearScene, RoundWindow};
pub use synth::{synth_cochlea, synth_cochlea_with, AnatomyLayout, SpiralParams};
pub use transform::RigidTransform;
pub use tube::{sweep_tube, CenterlineTube};

/// Distance from `point` to the closest point of `mesh`.
pub fn distance_to_mesh(mesh: &TriMesh, point: &Point) -> crate::Result<f64> {
    mesh.distance(point)
}

/// Ray-parity containment with surface tolerance; see [`TriMesh::contains`].
pub fn contains(mesh: &TriMesh, point: &Point) -> crate::Result<bool> {
    mesh.contains(point)
}

/// Clearance between a segment and the surface of a tube.
pub fn distance_to_tube(tube: &CenterlineTube, a: &Point, b: &Point) -> crate::Result<f64> {
    tube.distance_to_segment(a, b)
}
