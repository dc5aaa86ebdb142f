//! Synthetic cochlear anatomy.
//!
//! The scala tympani follows a logarithmic spiral with linear rise,
//!
//! ```text
//! c(θ) = (r(θ) cos θ, ±r(θ) sin θ, rise · θ / 360°),   r(θ) = basal_radius · taper^(θ / 360°)
//! ```
//!
//! with duct radius `duct_radius · sqrt(r(θ) / basal_radius)`. The scala
//! vestibuli is the same duct lifted along the axis until the two tubes just
//! clear each other. The seed jitters the global shape by a few percent and
//! adds a small ripple to the duct radius; the centerline itself always lies
//! exactly on the spiral model so the fitted modiolar axis is exact.
//!
//! The middle-ear structures are placed relative to the basal end of the
//! duct by an [`AnatomyLayout`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{fit_helix_axis, unwind_angle};
use super::tube::sweep_tube;
use super::{
    CenterlineSample, CenterlineTube, CochlearFrame, CochlearScene, Point, RoundWindow, TriMesh,
    Vector, Winding,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralParams {
    /// Angular extent of the scala tympani in degrees.
    pub turns: f64,
    pub basal_radius: f64,
    /// Radius ratio per full turn.
    pub taper: f64,
    /// Axial rise per full turn in mm.
    pub rise: f64,
    /// Duct radius at the base; tapers with the spiral radius.
    pub duct_radius: f64,
    pub seed: u64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams {
            turns: 900.0,
            basal_radius: 3.2,
            taper: 0.55,
            rise: 0.5,
            duct_radius: 0.6,
            seed: 0,
        }
    }
}

impl SpiralParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.turns >= 540.0) || !self.turns.is_finite() {
            return bad(format!(
                "turns must be at least 540 deg, got {}",
                self.turns
            ));
        }
        for (name, v) in [
            ("basal_radius", self.basal_radius),
            ("rise", self.rise),
            ("duct_radius", self.duct_radius),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.taper > 0.0 && self.taper <= 1.0) {
            return bad(format!("taper must lie in (0, 1], got {}", self.taper));
        }
        // the duct radius tapers with the square root of the spiral radius
        if self.duct_radius >= self.basal_radius * self.taper.powf(self.turns / 720.0) {
            return bad("duct radius reaches the modiolar axis".into());
        }
        Ok(())
    }
}

/// Placement and resolution of everything that is not the spiral itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnatomyLayout {
    pub side: Winding,
    /// Angular spacing of centerline samples and mesh rings.
    pub angular_step_deg: f64,
    pub ring_segments: usize,
    /// Wall-to-wall gap between scala tympani and scala vestibuli.
    pub sv_gap: f64,
    /// Half-width of the modiolar wall sheet, measured around the duct from
    /// the innermost line.
    pub wall_half_width_deg: f64,
    /// Relative amplitude of the seeded global jitter.
    pub jitter: f64,
    /// Relative amplitude of the seeded duct-radius ripple.
    pub ripple: f64,
    pub rw_radius: f64,
    /// Angle between the round-window normal and the outward basal tangent.
    pub rw_tilt_deg: f64,
    /// Stapes footplate centre: height above the round window along the
    /// modiolar axis, and lateral offset.
    pub stapes_height: f64,
    pub stapes_lateral: f64,
    /// Gap between the facial nerve surface and the approach corridor axis.
    pub facial_nerve_gap: f64,
    pub facial_nerve_radius: f64,
    pub chorda_gap: f64,
    pub chorda_radius: f64,
    /// Approach corridor span flanked by nerve and chorda, from the round
    /// window outwards.
    pub corridor_start: f64,
    pub corridor_end: f64,
    pub ossicles_gap: f64,
    pub ossicles_radius: f64,
    pub ossicles_depth: f64,
}

impl Default for AnatomyLayout {
    fn default() -> Self {
        AnatomyLayout {
            side: Winding::CounterClockwise,
            angular_step_deg: 5.0,
            ring_segments: 48,
            sv_gap: 0.06,
            wall_half_width_deg: 75.0,
            jitter: 0.03,
            ripple: 0.02,
            rw_radius: 0.6,
            rw_tilt_deg: 55.0,
            stapes_height: 2.6,
            stapes_lateral: 0.4,
            facial_nerve_gap: 4.2,
            facial_nerve_radius: 0.45,
            chorda_gap: 1.2,
            chorda_radius: 0.15,
            corridor_start: 2.0,
            corridor_end: 16.0,
            ossicles_gap: 3.0,
            ossicles_radius: 1.1,
            ossicles_depth: 5.0,
        }
    }
}

impl AnatomyLayout {
    /// Left ear: the spiral turns the other way round the modiolus.
    pub fn left() -> Self {
        AnatomyLayout {
            side: Winding::Clockwise,
            ..Self::default()
        }
    }

    /// A facial recess so narrow that the facial nerve crowds the corridor.
    pub fn narrow_facial_recess() -> Self {
        AnatomyLayout {
            facial_nerve_gap: 2.3,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.angular_step_deg > 0.0 && self.angular_step_deg < 30.0) {
            return Err(Error::InvalidParameter(
                "angular_step_deg must lie in (0, 30)".into(),
            ));
        }
        if self.ring_segments < 8 {
            return Err(Error::InvalidParameter(
                "ring_segments must be at least 8".into(),
            ));
        }
        if !(self.wall_half_width_deg > 0.0 && self.wall_half_width_deg < 180.0) {
            return Err(Error::InvalidParameter(
                "wall_half_width_deg must lie in (0, 180)".into(),
            ));
        }
        if !(self.jitter >= 0.0 && self.jitter < 0.2 && self.ripple >= 0.0 && self.ripple < 0.2) {
            return Err(Error::InvalidParameter(
                "jitter and ripple must lie in [0, 0.2)".into(),
            ));
        }
        if !(self.corridor_end > self.corridor_start) {
            return Err(Error::InvalidParameter(
                "corridor_end must exceed corridor_start".into(),
            ));
        }
        for v in [
            self.rw_radius,
            self.facial_nerve_radius,
            self.chorda_radius,
            self.ossicles_radius,
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(
                    "layout radii must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Spiral after seeded jitter, in canonical coordinates (modiolar axis `+z`
/// through the origin).
struct Spiral {
    basal_radius: f64,
    growth: f64,
    rise: f64,
    duct_radius: f64,
    sign: f64,
    ripple_amp: f64,
    ripple_period: f64,
    ripple_phase: f64,
}

impl Spiral {
    fn radius(&self, deg: f64) -> f64 {
        self.basal_radius * (-self.growth * deg.to_radians()).exp()
    }

    fn center(&self, deg: f64) -> Point {
        let a = deg.to_radians();
        let r = self.radius(deg);
        Point::new(
            r * a.cos(),
            self.sign * r * a.sin(),
            self.rise * deg / 360.0,
        )
    }

    fn tangent(&self, deg: f64) -> Vector {
        let a = deg.to_radians();
        let r = self.radius(deg);
        Vector::new(
            -self.growth * r * a.cos() - r * a.sin(),
            self.sign * (-self.growth * r * a.sin() + r * a.cos()),
            self.rise / std::f64::consts::TAU,
        )
        .normalize()
    }

    fn duct(&self, deg: f64) -> f64 {
        let ripple = 1.0
            + self.ripple_amp
                * (std::f64::consts::TAU * deg / self.ripple_period + self.ripple_phase).sin();
        self.duct_radius * (self.radius(deg) / self.basal_radius).sqrt() * ripple
    }

    /// Cross-section basis whose first vector points at the modiolus.
    fn ring_basis(&self, deg: f64) -> (Vector, Vector) {
        let t = self.tangent(deg);
        let a = deg.to_radians();
        let inward = -Vector::new(a.cos(), self.sign * a.sin(), 0.0);
        let e1 = (inward - t * inward.dot(&t)).normalize();
        (e1, t.cross(&e1))
    }
}

pub fn synth_cochlea(params: &SpiralParams) -> Result<CochlearScene> {
    synth_cochlea_with(params, &AnatomyLayout::default())
}

pub fn synth_cochlea_with(params: &SpiralParams, layout: &AnatomyLayout) -> Result<CochlearScene> {
    params.validate()?;
    layout.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut jitter = |v: f64| v * (1.0 + layout.jitter * rng.random_range(-1.0..=1.0));
    let basal_radius = jitter(params.basal_radius);
    let taper = jitter(params.taper).min(1.0);
    let rise = jitter(params.rise);
    let duct_radius = jitter(params.duct_radius);
    let spiral = Spiral {
        basal_radius,
        growth: -taper.ln() / std::f64::consts::TAU,
        rise,
        duct_radius,
        sign: layout.side.sign(),
        ripple_amp: layout.ripple,
        ripple_period: rng.random_range(180.0..360.0),
        ripple_phase: rng.random_range(0.0..std::f64::consts::TAU),
    };
    let check = SpiralParams {
        basal_radius,
        taper,
        rise,
        duct_radius: duct_radius * (1.0 + layout.ripple),
        ..params.clone()
    };
    check.validate()?;

    let steps = (params.turns / layout.angular_step_deg).ceil() as usize;
    let thetas: Vec<f64> = (0..=steps)
        .map(|i| params.turns * i as f64 / steps as f64)
        .collect();
    let centers: Vec<Point> = thetas.iter().map(|&t| spiral.center(t)).collect();
    let ducts: Vec<f64> = thetas.iter().map(|&t| spiral.duct(t)).collect();
    let basis: Vec<(Vector, Vector)> = thetas.iter().map(|&t| spiral.ring_basis(t)).collect();

    let segments = layout.ring_segments;
    let st = sweep_tube("scala_tympani", &centers, &ducts, Some(&basis), segments)?;

    // Lift the vestibular duct until its wall clears the tympanic duct by
    // the configured gap (both ducts share cross-section radius).
    let sv_centers: Vec<Point> = centers
        .iter()
        .zip(&ducts)
        .map(|(c, d)| c + Vector::z() * (2.0 * d + layout.sv_gap))
        .collect();
    let sv = sweep_tube(
        "scala_vestibuli",
        &sv_centers,
        &ducts,
        Some(&basis),
        segments,
    )?;

    let modiolar_wall = wall_sheet(&st, thetas.len(), segments, layout.wall_half_width_deg)?;

    let fit = fit_helix_axis(&centers)?;
    let rw_center = centers[0];
    let t0 = spiral.tangent(0.0);
    let lateral = {
        let w = Vector::x();
        (w - t0 * w.dot(&t0)).normalize()
    };
    let tilt = layout.rw_tilt_deg.to_radians();
    let rw_normal = -t0 * tilt.cos() + lateral * tilt.sin();
    let up = t0.cross(&lateral);
    let up = if up.z < 0.0 { -up } else { up };
    let stapes_center = rw_center + up * layout.stapes_height + lateral * layout.stapes_lateral;
    let apex = fit.origin + fit.axis * (centers[centers.len() - 1] - fit.origin).dot(&fit.axis);
    let frame = CochlearFrame::new(
        fit.axis,
        apex,
        rw_center,
        rw_normal,
        stapes_center,
        fit.winding,
    )?;
    let ext = -t0 - rw_normal * (-t0).dot(&rw_normal);
    let round_window = RoundWindow {
        radius: layout.rw_radius,
        extension_dir: ext.normalize(),
    };

    // Middle-ear structures flank a corridor running outwards along -t0.
    // The facial nerve sits on the side the extended openings move towards.
    let toward_fn = {
        let e = round_window.extension_dir;
        let perp = e - t0 * e.dot(&t0);
        perp.normalize()
    };
    let away = -toward_fn;
    let corridor = |s: f64| rw_center - t0 * s;
    let n_pts = 8;
    let span = |i: usize| {
        layout.corridor_start
            + (layout.corridor_end - layout.corridor_start) * i as f64 / (n_pts - 1) as f64
    };
    let fn_offset = layout.facial_nerve_gap + layout.facial_nerve_radius;
    let facial_nerve = CenterlineTube::uniform(
        (0..n_pts)
            .map(|i| {
                let s = span(i);
                // gentle descent away from the stapes
                corridor(s) + toward_fn * fn_offset - up * (0.04 * (s - layout.corridor_start))
            })
            .collect(),
        layout.facial_nerve_radius,
    )?;
    let chorda_dir = (away + up * 0.4).normalize();
    let chorda = CenterlineTube::uniform(
        (0..n_pts)
            .map(|i| corridor(span(i)) + chorda_dir * (layout.chorda_gap + layout.chorda_radius))
            .collect(),
        layout.chorda_radius,
    )?;
    let oss_center =
        corridor(layout.ossicles_depth) + up * (layout.ossicles_gap + layout.ossicles_radius);
    let ossicles = icosphere(
        "ossicles",
        &oss_center,
        &(Vector::new(1.0, 0.8, 1.25) * layout.ossicles_radius),
        2,
    )?;

    let angles = unwind_angle(&frame, &centers)?;
    let shift = angles[0];
    let st_centerline = centers
        .iter()
        .zip(&angles)
        .zip(&ducts)
        .map(|((p, a), r)| CenterlineSample {
            point: *p,
            angle_deg: a - shift,
            radius: *r,
        })
        .collect();

    let scene = CochlearScene {
        st,
        sv,
        modiolar_wall,
        ossicles,
        facial_nerve,
        chorda,
        frame,
        round_window,
        st_centerline,
    };
    scene.validate()?;
    Ok(scene)
}

/// Inner-facing band of the scala tympani surface, sharing its vertices.
fn wall_sheet(st: &TriMesh, rings: usize, segments: usize, half_width_deg: f64) -> Result<TriMesh> {
    let half = ((half_width_deg / 360.0) * segments as f64).floor() as isize;
    let cols: Vec<usize> = (-half..=half)
        .map(|j| j.rem_euclid(segments as isize) as usize)
        .collect();
    let width = cols.len();
    let mut vertices = Vec::with_capacity(rings * width);
    for i in 0..rings {
        for &j in &cols {
            vertices.push(st.vertices()[i * segments + j]);
        }
    }
    let idx = |i: usize, k: usize| (i * width + k) as u32;
    let mut triangles = Vec::with_capacity(2 * (rings - 1) * (width - 1));
    for i in 0..rings - 1 {
        for k in 0..width - 1 {
            let (a, b, c, d) = (idx(i, k), idx(i, k + 1), idx(i + 1, k + 1), idx(i + 1, k));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new("modiolar_wall", vertices, triangles)
}

/// Subdivided icosahedron scaled per axis.
pub fn icosphere(
    label: &str,
    center: &Point,
    radii: &Vector,
    subdivisions: usize,
) -> Result<TriMesh> {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache = std::collections::HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push((verts[a as usize] + verts[b as usize]).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts
        .iter()
        .map(|v| center + v.component_mul(radii))
        .collect();
    TriMesh::new(label, vertices, faces)
}
