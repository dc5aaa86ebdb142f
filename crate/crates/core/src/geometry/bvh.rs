//! Bounding-volume hierarchy over the triangles of a [`TriMesh`](super::TriMesh).
//!
//! Built once, never mutated. Nodes are stored in a flat vector; an interior
//! node's children live at `left` and `left + 1`.

use super::query;
use super::{Point, Vector};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.grow(&other.min);
        self.grow(&other.max);
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn half_diagonal(&self) -> f64 {
        (self.max - self.min).norm() * 0.5
    }

    pub fn distance_squared(&self, p: &Point) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = p[i];
            if v < self.min[i] {
                d2 += (self.min[i] - v).powi(2);
            } else if v > self.max[i] {
                d2 += (v - self.max[i]).powi(2);
            }
        }
        d2
    }

    /// Slab test; true when the ray `origin + t*dir, t >= 0` touches the box.
    pub fn hit_by_ray(&self, origin: &Point, inv_dir: &Vector) -> bool {
        let mut tmin: f64 = 0.0;
        let mut tmax = f64::INFINITY;
        for i in 0..3 {
            let t1 = (self.min[i] - origin[i]) * inv_dir[i];
            let t2 = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            // NaN from 0 * inf is treated as "no constraint on this axis".
            if !lo.is_nan() {
                tmin = tmin.max(lo);
            }
            if !hi.is_nan() {
                tmax = tmax.min(hi);
            }
        }
        tmin <= tmax * (1.0 + 1e-12) + 1e-12
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: range into `order`; interior: `left` child index, count == 0
    start: usize,
    count: usize,
    left: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(vertices: &[Point], triangles: &[[u32; 3]]) -> Self {
        let tri_bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&vertices[i as usize]);
                }
                b
            })
            .collect();
        let centroids: Vec<Point> = tri_bounds.iter().map(Aabb::center).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: triangles.len(),
            left: 0,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start, nodes[ni].count);
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &ti in &order[start..start + count] {
                bounds.merge(&tri_bounds[ti]);
                cbounds.grow(&centroids[ti]);
            }
            nodes[ni].bounds = bounds;
            if count <= LEAF_SIZE {
                continue;
            }
            let extent = cbounds.max - cbounds.min;
            let axis = if extent.x >= extent.y && extent.x >= extent.z {
                0
            } else if extent.y >= extent.z {
                1
            } else {
                2
            };
            let mid = count / 2;
            order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
                centroids[a][axis].total_cmp(&centroids[b][axis])
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                start,
                count: mid,
                left: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: start + mid,
                count: count - mid,
                left: 0,
            });
            nodes[ni].count = 0;
            nodes[ni].left = left;
            stack.push(left);
            stack.push(left + 1);
        }
        Bvh { nodes, order }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Closest point on the mesh surface to `p`: `(point, distance, triangle)`.
    pub fn closest_point(
        &self,
        vertices: &[Point],
        triangles: &[[u32; 3]],
        p: &Point,
    ) -> (Point, f64, usize) {
        let mut best = (Point::origin(), f64::INFINITY, usize::MAX);
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_squared(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = triangles[ti].map(|i| &vertices[i as usize]);
                    let q = query::closest_point_on_triangle(p, a, b, c);
                    let d2 = (p - q).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && ti < best.2) {
                        best_d2 = d2;
                        best = (q, d2.sqrt(), ti);
                    }
                }
            } else {
                let (l, r) = (node.left, node.left + 1);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // visit the nearer child first (pushed last)
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }

    /// Ray parameters of every triangle crossing along the ray.
    pub fn ray_hits(
        &self,
        vertices: &[Point],
        triangles: &[[u32; 3]],
        origin: &Point,
        dir: &Vector,
    ) -> Vec<f64> {
        let inv = Vector::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut hits = Vec::new();
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !node.bounds.hit_by_ray(origin, &inv) {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = triangles[ti].map(|i| &vertices[i as usize]);
                    if let Some(t) = query::ray_triangle(origin, dir, a, b, c) {
                        hits.push(t);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.left + 1);
            }
        }
        hits
    }

    /// Minimum distance from segment `pq` to the mesh surface.
    pub fn segment_distance(
        &self,
        vertices: &[Point],
        triangles: &[[u32; 3]],
        p: &Point,
        q: &Point,
    ) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let lower = query::point_segment_distance(&node.bounds.center(), p, q)
                - node.bounds.half_diagonal();
            if lower > best {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = triangles[ti].map(|i| &vertices[i as usize]);
                    best = best.min(query::segment_triangle_distance(p, q, a, b, c));
                }
            } else {
                stack.push(node.left);
                stack.push(node.left + 1);
            }
        }
        best
    }
}
