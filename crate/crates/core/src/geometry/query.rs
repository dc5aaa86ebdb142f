//! Exact closest-point and intersection primitives on points, segments and
//! triangles. Everything here is brute force on a single primitive; the
//! acceleration structure in [`super::bvh`] only prunes which primitives get
//! visited.

use super::{Point, Vector};

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm()
}

/// Parameter in `[0, 1]` of the point on segment `ab` closest to `p`.
pub fn closest_param_on_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return 0.0;
    }
    ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let t = closest_param_on_segment(p, a, b);
    (p - (a + (b - a) * t)).norm()
}

/// Closest points between segments `p1q1` and `p2q2`.
///
/// Returns `(s, t, distance)` where `s` and `t` are the parameters of the
/// closest points on the first and second segment.
pub fn segment_segment_closest(p1: &Point, q1: &Point, p2: &Point, q2: &Point) -> (f64, f64, f64) {
    const EPS: f64 = 1e-300;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0, r.norm());
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (s, t, (c1 - c2).norm())
}

/// Möller-Trumbore ray/triangle test. Returns the ray parameter of the hit.
pub fn ray_triangle(origin: &Point, dir: &Vector, a: &Point, b: &Point, c: &Point) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 0.0).then_some(t)
}

/// Distance between segment `pq` and triangle `abc`; zero when they cross.
pub fn segment_triangle_distance(p: &Point, q: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let dir = q - p;
    if let Some(t) = ray_triangle(p, &dir, a, b, c) {
        if t <= 1.0 {
            return 0.0;
        }
    }
    let mut best = point_triangle_distance(p, a, b, c).min(point_triangle_distance(q, a, b, c));
    for (u, v) in [(a, b), (b, c), (c, a)] {
        best = best.min(segment_segment_closest(p, q, u, v).2);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn triangle_regions() {
        let (a, b, c) = (pt(0., 0., 0.), pt(1., 0., 0.), pt(0., 1., 0.));
        assert_eq!(closest_point_on_triangle(&pt(-1., -1., 0.), &a, &b, &c), a);
        assert_eq!(closest_point_on_triangle(&pt(2., -0.5, 0.), &a, &b, &c), b);
        assert!((point_triangle_distance(&pt(0.2, 0.2, 1.0), &a, &b, &c) - 1.0).abs() < 1e-15);
        // edge bc region
        let d = point_triangle_distance(&pt(1., 1., 0.), &a, &b, &c);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parallel_segments() {
        let (s, _, d) = segment_segment_closest(
            &pt(0., 0., 0.),
            &pt(1., 0., 0.),
            &pt(0., 2., 0.),
            &pt(1., 2., 0.),
        );
        assert!((d - 2.0).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn crossing_segments() {
        let d = segment_segment_closest(
            &pt(-1., 0., 0.),
            &pt(1., 0., 0.),
            &pt(0., -1., 0.5),
            &pt(0., 1., 0.5),
        )
        .2;
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn segment_through_triangle() {
        let (a, b, c) = (pt(0., 0., 0.), pt(1., 0., 0.), pt(0., 1., 0.));
        assert_eq!(
            segment_triangle_distance(&pt(0.2, 0.2, -1.), &pt(0.2, 0.2, 1.), &a, &b, &c),
            0.0
        );
        let d = segment_triangle_distance(&pt(0.2, 0.2, 0.5), &pt(0.2, 0.2, 1.), &a, &b, &c);
        assert!((d - 0.5).abs() < 1e-15);
    }
}
