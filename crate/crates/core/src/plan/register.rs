//! Rigid registration of the resting array to the modiolar wall.
//!
//! Multi-start point-to-plane iterative closest point: every contact is
//! pulled towards its closest point on the modiolar wall, and contacts that
//! have left the scala tympani, or sit within the surface margin of leaving
//! it, are pushed back in with a penalty weight that grows tenfold until no
//! contact is left outside. Starts are laid out
//! in the cochlear frame, so the result moves with the scene.

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::RestingShape;
use crate::geometry::{unwind_angle, CochlearScene, Point, RigidTransform, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub seed: u64,
    /// Seeded random starts in addition to the fixed grid.
    pub random_starts: usize,
    /// Largest rotation of a random start, degrees.
    pub start_rotation_deg: f64,
    /// Largest translation of a random start, mm.
    pub start_translation: f64,
    /// Slide of the fixed grid starts around the modiolar axis, degrees.
    pub grid_slide_deg: f64,
    pub max_iterations: usize,
    /// Stop when the relative change of the objective falls below this.
    pub tolerance: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// Depth inside the scala tympani surface that stray contacts are pulled
    /// to, mm.
    pub surface_margin: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            seed: 0,
            random_starts: 8,
            start_rotation_deg: 10.0,
            start_translation: 0.3,
            grid_slide_deg: 15.0,
            max_iterations: 200,
            tolerance: 1e-8,
            initial_penalty: 10.0,
            max_penalty: 1e6,
            surface_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Root-mean-square contact-to-wall distance, mm.
    pub residual_rms: f64,
    /// Mean contact-to-wall distance, mm.
    pub predicted_mmd: f64,
    /// Cumulative angle of the tip contact, degrees.
    pub predicted_aid: f64,
    pub iterations: usize,
    pub penalty_weight: f64,
    /// Objective value after every iteration of the chosen start.
    pub trace: Vec<f64>,
    pub start_index: usize,
    pub starts: usize,
    pub feasible_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    /// Maps array-local coordinates into the scene.
    pub transform: RigidTransform,
    pub report: FitReport,
}

struct Outcome {
    transform: RigidTransform,
    mse: f64,
    iterations: usize,
    penalty: f64,
    trace: Vec<f64>,
}

/// Orthonormal basis of the cochlear frame: zero-angle ray, its quarter-turn
/// partner in the winding sense, and the modiolar axis oriented so the
/// winding is counter-clockwise about it.
fn frame_basis(scene: &CochlearScene) -> Matrix3<f64> {
    let f = &scene.frame;
    let z = f.modiolar_axis * f.winding.sign();
    let x = f.zero_angle_ray;
    Matrix3::from_columns(&[x, z.cross(&x), z])
}

/// Pose that lays the basal contact on the wall at the round window, the
/// array plane across the modiolar axis and the basal tangent along the duct.
fn nominal_start(scene: &CochlearScene, shape: &RestingShape) -> Result<RigidTransform> {
    let c = &scene.st_centerline;
    let z = scene.frame.modiolar_axis * scene.frame.winding.sign();
    let k = c
        .iter()
        .position(|s| s.angle_deg >= 5.0)
        .unwrap_or(1)
        .max(1);
    let t = c[k].point - c[0].point;
    let t = (t - z * t.dot(&z))
        .try_normalize(1e-12)
        .ok_or_else(|| Error::Degenerate("basal duct runs along the modiolar axis".into()))?;
    let world = Matrix3::from_columns(&[t, z.cross(&t), z]);
    let n = shape
        .plane_normal
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidParameter("array plane normal has zero length".into()))?;
    let t0 = (shape.insertion_tangent - n * shape.insertion_tangent.dot(&n))
        .try_normalize(1e-12)
        .ok_or_else(|| {
            Error::InvalidParameter("array tangent lies along its plane normal".into())
        })?;
    let local = Matrix3::from_columns(&[t0, n.cross(&t0), n]);
    let r = world * local.transpose();
    let (b, _, _) = scene.modiolar_wall.closest_point(&c[0].point)?;
    let base = shape.basal_contact();
    RigidTransform::new(r, b.coords - r * base.coords)
}

fn starts(
    scene: &CochlearScene,
    shape: &RestingShape,
    cfg: &RegistrationConfig,
) -> Result<Vec<RigidTransform>> {
    let nominal = nominal_start(scene, shape)?;
    let basis = frame_basis(scene);
    let axis = basis.column(2).into_owned();
    let apex = scene.frame.apex_origin;
    let mut out = Vec::new();
    for slide in [0.0, -cfg.grid_slide_deg, cfg.grid_slide_deg] {
        out.push(RigidTransform::about_axis(&apex, &axis, slide).compose(&nominal));
    }
    let pivot = nominal.apply_point(&shape.basal_contact());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_starts {
        let dir = loop {
            let v = Vector::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.1 && v.norm() <= 1.0 {
                break v;
            }
        };
        let angle = cfg.start_rotation_deg * rng.random_range(-1.0..1.0);
        let shift = Vector::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * cfg.start_translation;
        let rot = RigidTransform::about_axis(&pivot, &(basis * dir), angle);
        out.push(
            RigidTransform::from_translation(basis * shift)
                .compose(&rot)
                .compose(&nominal),
        );
    }
    Ok(out)
}

/// Residuals of one pose: each row is `(value, gradient, weight)` with the
/// gradient taken with respect to the posed contact.
struct Residuals {
    rows: Vec<(usize, f64, Vector, f64)>,
    objective: f64,
}

fn residuals(
    scene: &CochlearScene,
    posed: &[Point],
    penalty: f64,
    margin: f64,
) -> Result<Residuals> {
    let mut rows = Vec::with_capacity(2 * posed.len());
    let mut total = 0.0;
    for (i, p) in posed.iter().enumerate() {
        let (q, d, _) = scene.modiolar_wall.closest_point(p)?;
        let g = (p - q).try_normalize(1e-12).unwrap_or_else(Vector::zeros);
        rows.push((i, d, g, 1.0));
        total += d * d;
        let (inside, s, e) = scene.st.locate(p)?;
        // signed distance outside the surface, positive when outside
        let out = if inside { -e } else { e };
        let v = out + margin;
        if v > 0.0 {
            let n = (p - s).try_normalize(1e-12).unwrap_or_else(Vector::zeros);
            let n = if inside { -n } else { n };
            rows.push((i, v, n, penalty));
            total += penalty * v * v;
        }
    }
    Ok(Residuals {
        rows,
        objective: total / posed.len() as f64,
    })
}

/// Damped Gauss-Newton step on the point-to-plane linearisation, as a
/// rigid motion about the centroid of the posed contacts.
fn gauss_newton_step(posed: &[Point], r: &Residuals, damping: f64) -> Option<RigidTransform> {
    let c = Point::from(posed.iter().map(|p| p.coords).sum::<Vector>() / posed.len() as f64);
    let mut a = Matrix6::<f64>::zeros();
    let mut b = Vector6::<f64>::zeros();
    for &(i, v, n, w) in &r.rows {
        let arm = posed[i] - c;
        let j = Vector6::from_iterator(arm.cross(&n).iter().chain(n.iter()).copied());
        a += j * j.transpose() * w;
        b -= j * (w * v);
    }
    let scale = a.diagonal().max().max(1e-300);
    for k in 0..6 {
        a[(k, k)] += damping * scale;
    }
    let x = a.cholesky()?.solve(&b);
    let omega = Vector::new(x[0], x[1], x[2]);
    let t = Vector::new(x[3], x[4], x[5]);
    let rot = Rotation3::from_scaled_axis(omega);
    Some(RigidTransform::from_rotation(
        &rot,
        c.coords - rot * c.coords + t,
    ))
}

fn run_start(
    scene: &CochlearScene,
    contacts: &[Point],
    start: RigidTransform,
    cfg: &RegistrationConfig,
) -> Result<Option<Outcome>> {
    let pose_all =
        |t: &RigidTransform| -> Vec<Point> { contacts.iter().map(|x| t.apply_point(x)).collect() };
    let mut pose = start;
    let mut penalty = cfg.initial_penalty;
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut posed = pose_all(&pose);
        let mut current = residuals(scene, &posed, penalty, cfg.surface_margin)?;
        for _ in 0..cfg.max_iterations {
            iterations += 1;
            let mut accepted = None;
            let mut damping = 1e-9;
            for _ in 0..12 {
                let Some(step) = gauss_newton_step(&posed, &current, damping) else {
                    damping *= 10.0;
                    continue;
                };
                let candidate = step.compose(&pose);
                let moved = pose_all(&candidate);
                let next = residuals(scene, &moved, penalty, cfg.surface_margin)?;
                if next.objective < current.objective {
                    accepted = Some((candidate, moved, next));
                    break;
                }
                damping *= 10.0;
            }
            let Some((candidate, moved, next)) = accepted else {
                break;
            };
            let change = current.objective - next.objective;
            pose = candidate;
            posed = moved;
            current = next;
            trace.push(current.objective);
            if current.objective == 0.0 || change <= cfg.tolerance * (current.objective + change) {
                break;
            }
        }
        let mut inside = true;
        for p in &posed {
            if !scene.st.contains(p)? {
                inside = false;
                break;
            }
        }
        if inside {
            let mut mse = 0.0;
            for p in &posed {
                mse += scene.modiolar_wall.distance(p)?.powi(2);
            }
            return Ok(Some(Outcome {
                transform: pose,
                mse: mse / posed.len() as f64,
                iterations,
                penalty,
                trace,
            }));
        }
        penalty *= 10.0;
        if penalty > cfg.max_penalty {
            return Ok(None);
        }
    }
}

/// Rigid pose of `shape` that best seats its contacts against the modiolar
/// wall while keeping every contact inside the scala tympani.
pub fn register_array(
    scene: &CochlearScene,
    shape: &RestingShape,
    cfg: &RegistrationConfig,
) -> Result<Registration> {
    scene.validate()?;
    let contacts = &shape.contact_centers;
    if contacts.len() < 2 {
        return Err(Error::InvalidParameter(
            "registration needs at least 2 contacts".into(),
        ));
    }
    let starts = starts(scene, shape, cfg)?;
    let outcomes: Vec<Option<Outcome>> = starts
        .par_iter()
        .map(|s| run_start(scene, contacts, *s, cfg))
        .collect::<Result<_>>()?;
    let basis = frame_basis(scene);
    let apex = scene.frame.apex_origin;
    let key = |o: &Outcome| -> [f64; 3] {
        let t = basis.transpose() * (o.transform.translation() - apex.coords);
        [t.x, t.y, t.z]
    };
    let feasible_starts = outcomes.iter().flatten().count();
    let (start_index, best) = outcomes
        .into_iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|o| (i, o)))
        .min_by(|(_, a), (_, b)| {
            // residual first, with a relative tolerance so that frame
            // rounding cannot flip the order; translation breaks ties
            let scale = a.mse.max(b.mse).max(1e-300);
            if (a.mse - b.mse).abs() > 1e-9 * scale {
                a.mse.total_cmp(&b.mse)
            } else {
                let (ka, kb) = (key(a), key(b));
                ka.iter()
                    .zip(&kb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            }
        })
        .ok_or(Error::InfeasibleRegistration)?;

    let posed: Vec<Point> = contacts
        .iter()
        .map(|x| best.transform.apply_point(x))
        .collect();
    let mut mmd = 0.0;
    for p in &posed {
        mmd += scene.modiolar_wall.distance(p)?;
    }
    let base_to_tip: Vec<Point> = posed.iter().rev().copied().collect();
    let aid = *unwind_angle(&scene.frame, &base_to_tip)?.last().unwrap();
    Ok(Registration {
        transform: best.transform,
        report: FitReport {
            residual_rms: best.mse.sqrt(),
            predicted_mmd: mmd / posed.len() as f64,
            predicted_aid: aid,
            iterations: best.iterations,
            penalty_weight: best.penalty,
            trace: best.trace,
            start_index,
            starts: starts.len(),
            feasible_starts,
        },
    })
}
