//! Pose vectors and rigid transforms.
//!
//! Rotations use the fixed-axis X-Y-Z convention (roll, pitch, yaw about the
//! axes of the reference frame): `R = Rz(rz) * Ry(ry) * Rx(rx)`. Angles are
//! radians everywhere in this crate; degrees only appear in the file formats.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in 3D space, lengths in mm.
pub type Point3 = nalgebra::Point3<f64>;

/// Tag written into every file that stores angles.
pub const EULER_CONVENTION: &str = "fixed-XYZ";

/// Orthonormality / determinant tolerance for [`Transform3D`].
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// `|cos(ry)|` below this is treated as gimbal lock.
pub const GIMBAL_LOCK_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("pose component {0} is not finite")]
    NonFinitePose(&'static str),
    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation has determinant {0}, expected +1")]
    NotProperRotation(f64),
    #[error("translation is not finite")]
    NonFiniteTranslation,
    #[error("gimbal lock: |cos(ry)| = {0:e} is below {GIMBAL_LOCK_TOL:e}")]
    GimbalLock(f64),
}

/// 6-DOF pose: translations in mm, rotations in rad (fixed-axis X-Y-Z).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose6 {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl Pose6 {
    pub const COMPONENTS: [&'static str; 6] = ["tx", "ty", "tz", "rx", "ry", "rz"];

    pub const fn new(tx: f64, ty: f64, tz: f64, rx: f64, ry: f64, rz: f64) -> Self {
        Self { tx, ty, tz, rx, ry, rz }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// Builds a pose from mm and degrees.
    pub fn from_mm_deg(tx: f64, ty: f64, tz: f64, rx: f64, ry: f64, rz: f64) -> Self {
        Self::new(tx, ty, tz, rx.to_radians(), ry.to_radians(), rz.to_radians())
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.tx, self.ty, self.tz, self.rx, self.ry, self.rz]
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.tx, self.ty, self.tz)
    }

    /// Checks that every component is finite.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, v) in Self::COMPONENTS.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(GeometryError::NonFinitePose(name));
            }
        }
        Ok(())
    }

    /// Component-wise difference `self - other`.
    pub fn delta(&self, other: &Pose6) -> Pose6 {
        let a = self.to_array();
        let b = other.to_array();
        Pose6::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }

    /// Largest absolute translation component (mm).
    pub fn max_abs_translation(&self) -> f64 {
        self.tx.abs().max(self.ty.abs()).max(self.tz.abs())
    }

    /// Largest absolute rotation component (rad).
    pub fn max_abs_rotation(&self) -> f64 {
        self.rx.abs().max(self.ry.abs()).max(self.rz.abs())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.rz) * rot_y(self.ry) * rot_x(self.rx)
    }

    /// Maps Euler-angle rates `(rx', ry', rz')` to the angular velocity
    /// expressed in the reference frame.
    pub fn angular_velocity_map(&self) -> Matrix3<f64> {
        let rz = rot_z(self.rz);
        let rzy = rz * rot_y(self.ry);
        let ex = rzy * Vector3::x();
        let ey = rz * Vector3::y();
        let ez = Vector3::z();
        Matrix3::from_columns(&[ex, ey, ez])
    }
}

pub(crate) fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub(crate) fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub(crate) fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rigid transform `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform3D {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Transform3D {
    /// Builds a transform, checking `RᵀR = I` and `det R = +1` to 1e-12.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteTranslation);
        }
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !dev.is_finite() || dev > ORTHONORMAL_TOL {
            return Err(GeometryError::NotOrthonormal(dev));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::NotProperRotation(det));
        }
        Ok(Self { rotation, translation })
    }

    /// Caller guarantees the rotation is orthonormal (products of valid
    /// rotations, SVD outputs).
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::from_parts(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: maps a point through `other`, then `self`.
    pub fn compose(&self, other: &Transform3D) -> Transform3D {
        Transform3D::from_parts(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Transform3D {
        let rt = self.rotation.transpose();
        Transform3D::from_parts(rt, -(rt * self.translation))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Angle (rad) of the relative rotation between two transforms.
    pub fn rotation_angle_to(&self, other: &Transform3D) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        // acos loses precision near 0; use the skew part instead
        let skew = Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        );
        (skew.norm() / 2.0).atan2(c)
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

/// Pose vector to rigid transform.
pub fn pose_to_transform(p: &Pose6) -> Transform3D {
    Transform3D::from_parts(p.rotation(), p.translation())
}

/// Rigid transform to pose vector; fails near `|ry| = π/2`.
pub fn transform_to_pose(t: &Transform3D) -> Result<Pose6, GeometryError> {
    let r = t.rotation();
    let cos_ry = r[(0, 0)].hypot(r[(1, 0)]);
    if cos_ry < GIMBAL_LOCK_TOL {
        return Err(GeometryError::GimbalLock(cos_ry));
    }
    let ry = (-r[(2, 0)]).atan2(cos_ry);
    let rx = r[(2, 1)].atan2(r[(2, 2)]);
    let rz = r[(1, 0)].atan2(r[(0, 0)]);
    let tr = t.translation();
    Ok(Pose6::new(tr.x, tr.y, tr.z, rx, ry, rz))
}

pub fn compose(a: &Transform3D, b: &Transform3D) -> Transform3D {
    a.compose(b)
}

pub fn inverse(t: &Transform3D) -> Transform3D {
    t.inverse()
}
