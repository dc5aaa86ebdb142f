//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use cochlea_plan::array::{RestingShape, APICAL_CONTACTS};
use cochlea_plan::geometry::{CochlearScene, Point, RigidTransform, TriMesh, Vector};
use cochlea_plan::plan::{ClockFace, EntryKind, EntrySite, InsertionPlan, OVERINSERT_MM};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Plane projection when it falls inside the triangle, otherwise the
/// nearest edge.
pub fn triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm_squared();
    if area2 > 0.0 {
        let q = p - n * ((p - a).dot(&n) / area2);
        let u = (b - q).cross(&(c - q)).dot(&n) / area2;
        let v = (c - q).cross(&(a - q)).dot(&n) / area2;
        let w = 1.0 - u - v;
        if u >= 0.0 && v >= 0.0 && w >= 0.0 {
            return (p - q).norm();
        }
    }
    segment_distance(p, a, b)
        .min(segment_distance(p, b, c))
        .min(segment_distance(p, c, a))
}

pub fn brute_distance(mesh: &TriMesh, p: &Point) -> f64 {
    (0..mesh.triangles().len())
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Generalised winding number from the solid angle of every triangle.
pub fn winding_number(mesh: &TriMesh, p: &Point) -> f64 {
    let mut total = 0.0;
    for i in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(i);
        let (a, b, c) = (a - p, b - p, c - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

pub fn random_in_box(rng: &mut ChaCha8Rng, lo: &Point, hi: &Point, pad: f64) -> Point {
    Point::new(
        rng.random_range(lo.x - pad..hi.x + pad),
        rng.random_range(lo.y - pad..hi.y + pad),
        rng.random_range(lo.z - pad..hi.z + pad),
    )
}

/// An array whose contacts sit on the modiolar wall of `scene` itself, from
/// 2 deg to 452 deg, so the identity pose seats it perfectly.
pub fn wall_hugging_shape(scene: &CochlearScene) -> RestingShape {
    let n = 22;
    let mut contacts: Vec<Point> = (0..n)
        .map(|i| {
            let deg = 2.0 + 450.0 * i as f64 / (n - 1) as f64;
            let c = scene.st_point_at(deg).unwrap();
            scene.modiolar_wall.closest_point(&c).unwrap().0
        })
        .collect();
    contacts.reverse();
    let basal = contacts[n - 1];
    let normal = scene.frame.modiolar_axis * scene.frame.winding.sign();
    let along = scene.st_point_at(3.0).unwrap() - scene.st_point_at(1.0).unwrap();
    let tangent = (along - normal * along.dot(&normal)).normalize();
    let mut arc = vec![0.0; n];
    for i in (0..n - 1).rev() {
        arc[i] = arc[i + 1] + (contacts[i] - contacts[i + 1]).norm();
    }
    RestingShape {
        centerline: contacts.clone(),
        contact_vertex: (0..n).collect(),
        contact_arc: arc,
        marker_points: [0.5, 1.0, 1.5].map(|d| basal - tangent * d),
        apical_index_set: (0..APICAL_CONTACTS).collect(),
        plane_normal: normal,
        curl_direction: normal.cross(&tangent),
        insertion_tangent: tangent,
        contact_centers: contacts,
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng, max_deg: f64, max_shift: f64) -> RigidTransform {
    let axis = Vector::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let pivot = Point::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    );
    let shift = Vector::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    RigidTransform::from_translation(shift * max_shift).compose(&RigidTransform::about_axis(
        &pivot,
        &axis,
        rng.random_range(-max_deg..max_deg),
    ))
}

pub const GOLDEN: &str = include_str!("../golden/example_plan.txt");

/// The worked example behind the golden text.
pub fn example_plan() -> InsertionPlan {
    InsertionPlan {
        entry: EntrySite {
            kind: EntryKind::SubstantialExtendedRw,
            point: Point::new(1.0, 2.0, 3.0),
        },
        vector: Vector::new(0.0, 0.6, 0.8),
        clearance_fn: 1.5,
        clearance_chorda: 0.5,
        clearance_ossicles: 3.0,
        tilt_deg: 55.0,
        curl_clock: ClockFace::new(11, 30).unwrap(),
        entry_clock: Some(ClockFace::new(7, 30).unwrap()),
        base_depth: -0.5,
        overinsert_depth: -0.5 + OVERINSERT_MM,
        registered_pose: RigidTransform::identity(),
        predicted_aid: 452.0,
        predicted_mmd: 0.21,
    }
}
