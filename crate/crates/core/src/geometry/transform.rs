use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::{Point, Vector};
use crate::{Error, Result};

const RIGIDITY_TOLERANCE: f64 = 1e-9;

/// Proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<RawTransform> for RigidTransform {
    type Error = Error;

    fn try_from(raw: RawTransform) -> Result<Self> {
        let r = Matrix3::from_fn(|i, j| raw.rotation[i][j]);
        RigidTransform::new(r, Vector::from(raw.translation))
    }
}

impl From<RigidTransform> for RawTransform {
    fn from(t: RigidTransform) -> Self {
        RawTransform {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| t.rotation[(i, j)])),
            translation: t.translation.into(),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    /// Rejects matrices that are not orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::NonRigid("non-finite entry".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if err > RIGIDITY_TOLERANCE {
            return Err(Error::NonRigid(format!(
                "R^T R deviates from identity by {err:.3e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > RIGIDITY_TOLERANCE {
            return Err(Error::NonRigid(format!("determinant {det:.6}")));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector::zeros(),
        }
    }

    pub fn from_translation(t: Vector) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_rotation(r: &Rotation3<f64>, translation: Vector) -> Self {
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    /// Rotation by `angle_deg` about `axis` through `pivot`.
    pub fn about_axis(pivot: &Point, axis: &Vector, angle_deg: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_deg.to_radians());
        RigidTransform::from_rotation(&r, pivot.coords - r * pivot.coords)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    pub fn apply_point(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector) -> Vector {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in degrees.
    pub fn angle_deg(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }
}
