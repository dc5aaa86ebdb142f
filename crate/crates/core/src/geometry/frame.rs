//! The cochlear coordinate frame and angular measurements around the
//! modiolar axis.
//!
//! Angles are measured in the plane perpendicular to the modiolar axis, from
//! the ray pointing at the round-window centre. Which rotation sense counts
//! as positive is a property of the ear ([`Winding`]); it is fixed so that
//! angles grow from base to apex along the scala tympani.

use serde::{Deserialize, Serialize};

use super::{Point, RigidTransform, Vector};
use crate::{Error, Result};

/// Rotation sense of the cochlear spiral, seen from the apex looking down the
/// modiolar axis towards the base (i.e. against the axis direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winding {
    CounterClockwise,
    Clockwise,
}

impl Winding {
    pub fn sign(self) -> f64 {
        match self {
            Winding::CounterClockwise => 1.0,
            Winding::Clockwise => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame")]
pub struct CochlearFrame {
    /// Unit vector along the modiolus, pointing from base to apex.
    pub modiolar_axis: Vector,
    /// Point on the modiolar axis at the height of the apex.
    pub apex_origin: Point,
    pub rw_center: Point,
    /// Unit normal of the round-window plane, pointing out of the cochlea.
    pub rw_plane_normal: Vector,
    /// Unit vector perpendicular to the axis, towards the round-window centre.
    pub zero_angle_ray: Vector,
    pub stapes_center: Point,
    pub winding: Winding,
}

#[derive(Deserialize)]
struct RawFrame {
    modiolar_axis: Vector,
    apex_origin: Point,
    rw_center: Point,
    rw_plane_normal: Vector,
    zero_angle_ray: Vector,
    stapes_center: Point,
    winding: Winding,
}

impl TryFrom<RawFrame> for CochlearFrame {
    type Error = Error;

    fn try_from(raw: RawFrame) -> Result<Self> {
        let frame = CochlearFrame::new(
            raw.modiolar_axis,
            raw.apex_origin,
            raw.rw_center,
            raw.rw_plane_normal,
            raw.stapes_center,
            raw.winding,
        )?;
        if (frame.zero_angle_ray - raw.zero_angle_ray).norm() > 1e-9 {
            return Err(Error::InvalidParameter(
                "zero_angle_ray does not point at the round-window centre".into(),
            ));
        }
        Ok(frame)
    }
}

impl CochlearFrame {
    /// Normalises the axis and normal and derives the zero-angle ray.
    pub fn new(
        modiolar_axis: Vector,
        apex_origin: Point,
        rw_center: Point,
        rw_plane_normal: Vector,
        stapes_center: Point,
        winding: Winding,
    ) -> Result<Self> {
        let axis = modiolar_axis
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidParameter("modiolar axis has zero length".into()))?;
        let normal = rw_plane_normal
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidParameter("round-window normal has zero length".into()))?;
        let radial = rw_center - apex_origin;
        let zero = (radial - axis * radial.dot(&axis))
            .try_normalize(1e-9)
            .ok_or_else(|| {
                Error::InvalidParameter("round-window centre lies on the modiolar axis".into())
            })?;
        Ok(CochlearFrame {
            modiolar_axis: axis,
            apex_origin,
            rw_center,
            rw_plane_normal: normal,
            zero_angle_ray: zero,
            stapes_center,
            winding,
        })
    }

    pub fn transformed(&self, t: &RigidTransform) -> CochlearFrame {
        CochlearFrame {
            modiolar_axis: t.apply_vector(&self.modiolar_axis),
            apex_origin: t.apply_point(&self.apex_origin),
            rw_center: t.apply_point(&self.rw_center),
            rw_plane_normal: t.apply_vector(&self.rw_plane_normal),
            zero_angle_ray: t.apply_vector(&self.zero_angle_ray),
            stapes_center: t.apply_point(&self.stapes_center),
            winding: self.winding,
        }
    }

    /// Signed angle in radians in `(-π, π]`, positive in the winding sense.
    fn signed_angle(&self, p: &Point) -> Result<f64> {
        let d = p - self.apex_origin;
        let q = d - self.modiolar_axis * d.dot(&self.modiolar_axis);
        if q.norm() <= 1e-9 {
            return Err(Error::DegeneratePoint);
        }
        let sin = self.modiolar_axis.dot(&self.zero_angle_ray.cross(&q));
        let cos = self.zero_angle_ray.dot(&q);
        Ok(self.winding.sign() * sin.atan2(cos))
    }

    /// Distance from the modiolar axis.
    pub fn radial_distance(&self, p: &Point) -> f64 {
        let d = p - self.apex_origin;
        (d - self.modiolar_axis * d.dot(&self.modiolar_axis)).norm()
    }

    /// Height along the modiolar axis relative to the apex origin.
    pub fn axial_height(&self, p: &Point) -> f64 {
        (p - self.apex_origin).dot(&self.modiolar_axis)
    }

    /// Point at cylindrical coordinates `(radius, angle_deg, height)`.
    pub fn point_at(&self, radius: f64, angle_deg: f64, height: f64) -> Point {
        let a = self.winding.sign() * angle_deg.to_radians();
        let side = self.modiolar_axis.cross(&self.zero_angle_ray);
        self.apex_origin
            + (self.zero_angle_ray * a.cos() + side * a.sin()) * radius
            + self.modiolar_axis * height
    }
}

/// Angle of `point` around the modiolar axis, in `[0, 360)`.
pub fn angular_coordinate(frame: &CochlearFrame, point: &Point) -> Result<f64> {
    let deg = frame.signed_angle(point)?.to_degrees();
    let wrapped = deg.rem_euclid(360.0);
    Ok(if wrapped >= 360.0 { 0.0 } else { wrapped })
}

/// Cumulative angles along `path`.
///
/// The first sample is reported in `(-180, 180]` so a path starting just
/// short of the round window begins slightly negative. Each later sample adds
/// the wrapped step from its predecessor; a step of 180° or more cannot be
/// told apart from its complement and is rejected.
pub fn unwind_angle(frame: &CochlearFrame, path: &[Point]) -> Result<Vec<f64>> {
    if path.len() < 2 {
        return Err(Error::InvalidParameter(
            "unwind_angle needs at least 2 points".into(),
        ));
    }
    let mut out = Vec::with_capacity(path.len());
    let mut prev = frame.signed_angle(&path[0])?.to_degrees();
    if prev <= -180.0 {
        prev += 360.0;
    }
    let mut total = prev;
    out.push(total);
    for (i, p) in path.iter().enumerate().skip(1) {
        let a = frame.signed_angle(p)?.to_degrees();
        let mut step = (a - prev).rem_euclid(360.0);
        if step > 180.0 {
            step -= 360.0;
        }
        if step.abs() >= 180.0 {
            return Err(Error::UndersampledPath {
                index: i - 1,
                step_deg: step.abs(),
            });
        }
        total += step;
        prev = a;
        out.push(total);
    }
    Ok(out)
}

/// Least-squares fit of a logarithmic helix (radius `exp(α + βφ)`, height
/// `γ + δφ`) to an ordered curve.
#[derive(Debug, Clone)]
pub struct HelixFit {
    /// Unit axis oriented so the curve rises along it.
    pub axis: Vector,
    /// Point on the axis level with the first sample.
    pub origin: Point,
    pub winding: Winding,
    /// Root-mean-square residual in mm.
    pub rms: f64,
}

struct AxisParam {
    a0: Vector,
    u: Vector,
    v: Vector,
    o0: Point,
}

impl AxisParam {
    fn decode(&self, x: &[f64; 4]) -> (Vector, Point) {
        let axis = (self.a0 + self.u * x[0] + self.v * x[1]).normalize();
        (axis, self.o0 + self.u * x[2] + self.v * x[3])
    }
}

fn helix_residual(points: &[Point], axis: &Vector, origin: &Point) -> f64 {
    let n = points.len() as f64;
    let u = if axis.x.abs() < 0.9 {
        Vector::x()
    } else {
        Vector::y()
    };
    let u = (u - axis * u.dot(axis)).normalize();
    let v = axis.cross(&u);
    let mut phi = Vec::with_capacity(points.len());
    let mut ln_r = Vec::with_capacity(points.len());
    let mut z = Vec::with_capacity(points.len());
    let mut prev = 0.0;
    let mut total = 0.0;
    let mut rsum = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d = p - origin;
        let h = d.dot(axis);
        let q = d - axis * h;
        let r = q.norm();
        if r < 1e-9 {
            return f64::INFINITY;
        }
        let a = q.dot(&v).atan2(q.dot(&u));
        if i == 0 {
            total = a;
        } else {
            let mut s = (a - prev).rem_euclid(std::f64::consts::TAU);
            if s > std::f64::consts::PI {
                s -= std::f64::consts::TAU;
            }
            total += s;
        }
        prev = a;
        phi.push(total);
        ln_r.push(r.ln());
        z.push(h);
        rsum += r;
    }
    let rbar = rsum / n;
    let ss = |y: &[f64]| -> f64 {
        let mx = phi.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = phi.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = phi.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        phi.iter()
            .zip(y)
            .map(|(x, y)| (y - my - b * (x - mx)).powi(2))
            .sum()
    };
    ((rbar * rbar * ss(&ln_r) + ss(&z)) / n).sqrt()
}

/// Fits the modiolar axis to an ordered centerline that spirals around it.
pub fn fit_helix_axis(points: &[Point]) -> Result<HelixFit> {
    if points.len() < 8 {
        return Err(Error::InvalidParameter(
            "helix fit needs at least 8 points".into(),
        ));
    }
    // Binormals of a slowly rising spiral average to the axis direction.
    let mut a0 = Vector::zeros();
    for w in points.windows(3) {
        a0 += (w[1] - w[0]).cross(&(w[2] - w[1]));
    }
    let a0 = a0
        .try_normalize(1e-12)
        .ok_or_else(|| Error::Degenerate("centerline does not curve".into()))?;
    let u = if a0.x.abs() < 0.9 {
        Vector::x()
    } else {
        Vector::y()
    };
    let u = (u - a0 * u.dot(&a0)).normalize();
    let v = a0.cross(&u);
    let centroid =
        Point::from(points.iter().map(|p| p.coords).sum::<Vector>() / points.len() as f64);
    let o0 = centroid - a0 * (centroid - points[0]).dot(&a0);
    let param = AxisParam { a0, u, v, o0 };
    let scale = points
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max);
    let objective = |x: &[f64; 4]| {
        let (axis, origin) = param.decode(x);
        helix_residual(points, &axis, &origin)
    };
    let steps = [0.05, 0.05, 0.1 * scale, 0.1 * scale];
    let mut x = nelder_mead(&objective, [0.0; 4], steps, 4000);
    // A restart shakes the simplex out of any premature collapse.
    x = nelder_mead(&objective, x, steps.map(|s| s * 0.01), 4000);
    let rms = objective(&x);
    let (mut axis, origin) = param.decode(&x);
    let first = points[0];
    let last = points[points.len() - 1];
    if (last - first).dot(&axis) < 0.0 {
        axis = -axis;
    }
    let origin = origin + axis * (first - origin).dot(&axis);
    let q0 = first - origin;
    let q1 = points[1] - origin;
    let winding = if axis.dot(&q0.cross(&q1)) >= 0.0 {
        Winding::CounterClockwise
    } else {
        Winding::Clockwise
    };
    Ok(HelixFit {
        axis,
        origin,
        winding,
        rms,
    })
}

fn nelder_mead(
    f: &impl Fn(&[f64; 4]) -> f64,
    x0: [f64; 4],
    step: [f64; 4],
    max_iter: usize,
) -> [f64; 4] {
    const N: usize = 4;
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += step[i];
        simplex.push((x, f(&x)));
    }
    let lerp = |a: &[f64; N], b: &[f64; N], t: f64| -> [f64; N] {
        std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[N].1);
        if (worst - best).abs() <= 1e-15 * (1.0 + best.abs()) {
            break;
        }
        let centroid: [f64; N] =
            std::array::from_fn(|i| simplex[..N].iter().map(|s| s.0[i]).sum::<f64>() / N as f64);
        let xw = simplex[N].0;
        let xr = lerp(&centroid, &xw, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &xw, -2.0);
            let fe = f(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = lerp(&centroid, &xr, 0.5);
                (xc, f(&xc))
            } else {
                let xc = lerp(&centroid, &xw, 0.5);
                (xc, f(&xc))
            };
            if fc < worst.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                let x_best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&x_best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> CochlearFrame {
        CochlearFrame::new(
            Vector::z(),
            Point::origin(),
            Point::new(3.0, 0.0, -2.0),
            Vector::new(0.0, -1.0, 0.0),
            Point::new(3.0, 0.0, 1.0),
            Winding::CounterClockwise,
        )
        .unwrap()
    }

    #[test]
    fn quarter_turns() {
        let f = frame();
        assert_eq!(
            angular_coordinate(&f, &Point::new(1.0, 0.0, 5.0)).unwrap(),
            0.0
        );
        assert!((angular_coordinate(&f, &Point::new(0.0, 1.0, 0.0)).unwrap() - 90.0).abs() < 1e-12);
        assert!(
            (angular_coordinate(&f, &Point::new(-2.0, 0.0, 0.0)).unwrap() - 180.0).abs() < 1e-12
        );
        assert!(
            (angular_coordinate(&f, &Point::new(0.0, -1.0, 0.0)).unwrap() - 270.0).abs() < 1e-12
        );
        assert!(matches!(
            angular_coordinate(&f, &Point::new(0.0, 0.0, 4.0)),
            Err(Error::DegeneratePoint)
        ));
    }

    #[test]
    fn clockwise_ear_mirrors() {
        let mut f = frame();
        f.winding = Winding::Clockwise;
        assert!(
            (angular_coordinate(&f, &Point::new(0.0, -1.0, 0.0)).unwrap() - 90.0).abs() < 1e-12
        );
        let p = f.point_at(2.0, 123.0, 0.5);
        assert!((angular_coordinate(&f, &p).unwrap() - 123.0).abs() < 1e-9);
    }

    #[test]
    fn unwind_full_circle_and_fold() {
        let f = frame();
        let circle: Vec<Point> = (0..=36)
            .map(|i| f.point_at(2.0, i as f64 * 10.0, 0.0))
            .collect();
        let u = unwind_angle(&f, &circle).unwrap();
        assert!((u.last().unwrap() - 360.0).abs() < 1e-9);

        let jump = [f.point_at(2.0, 0.0, 0.0), f.point_at(2.0, 180.0, 0.0)];
        assert!(matches!(
            unwind_angle(&f, &jump),
            Err(Error::UndersampledPath { index: 0, .. })
        ));
        assert!(unwind_angle(&f, &jump[..1]).is_err());
    }

    #[test]
    fn first_sample_may_be_negative() {
        let f = frame();
        let p = [f.point_at(2.0, -5.0, 0.0), f.point_at(2.0, 20.0, 0.0)];
        let u = unwind_angle(&f, &p).unwrap();
        assert!((u[0] + 5.0).abs() < 1e-9 && (u[1] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn helix_fit_recovers_tilted_axis() {
        let axis = Vector::new(0.3, -0.2, 1.0).normalize();
        let zero = Vector::new(1.0, 0.0, -0.3).normalize();
        let f = CochlearFrame::new(
            axis,
            Point::new(1.0, 2.0, 3.0),
            Point::new(1.0, 2.0, 3.0) + zero * 3.0,
            Vector::x(),
            Point::origin(),
            Winding::Clockwise,
        )
        .unwrap();
        let pts: Vec<Point> = (0..=180)
            .map(|i| {
                let th = i as f64 * 5.0;
                f.point_at(3.2 * 0.55f64.powf(th / 360.0), th, 1.4 * th / 360.0)
            })
            .collect();
        let fit = fit_helix_axis(&pts).unwrap();
        assert!(fit.rms < 1e-7, "rms {}", fit.rms);
        assert!((fit.axis - axis).norm() < 1e-6);
        assert_eq!(fit.winding, Winding::Clockwise);
        let off = fit.origin - f.apex_origin;
        assert!((off - axis * off.dot(&axis)).norm() < 1e-6);
    }
}
