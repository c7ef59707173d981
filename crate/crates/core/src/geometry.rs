//! SE(3) rigid transforms with explicit pose-convention tags.
//!
//! Rotations are stored as 3×3 matrices. Quaternions only appear at parse
//! boundaries (COLMAP stores `QW QX QY QZ`), see [`UnitQuaternion`].

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use thiserror::Error;

/// Maximum deviation of `‖q‖` from 1 accepted at ingestion.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

/// Orthonormality tolerance used when validating user-supplied matrices.
pub const RIGID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion norm {norm} deviates from 1 by more than {QUATERNION_NORM_TOL}")]
    NonUnitQuaternion { norm: f64 },
    #[error("matrix is not a rigid transform: {0}")]
    NotRigid(String),
    #[error("cannot compose {outer} after {inner}: frames do not chain")]
    FrameMismatch { outer: String, inner: String },
}

/// Which way a pose maps points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoseConvention {
    /// `T_cw`: world coordinates in, camera coordinates out (COLMAP's storage).
    WorldToCamera,
    /// `T_wc`: camera coordinates in, world coordinates out (what NeRF trainers consume).
    CameraToWorld,
}

impl PoseConvention {
    pub fn flipped(self) -> Self {
        match self {
            PoseConvention::WorldToCamera => PoseConvention::CameraToWorld,
            PoseConvention::CameraToWorld => PoseConvention::WorldToCamera,
        }
    }
}

/// Scalar-first unit quaternion `(w, x, y, z)`, Hamilton convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a unit quaternion, renormalizing when `‖q‖` is within
    /// [`QUATERNION_NORM_TOL`] of one and rejecting it otherwise.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(GeometryError::NonUnitQuaternion { norm });
        }
        if norm == 1.0 {
            return Ok(UnitQuaternion { w, x, y, z });
        }
        Ok(UnitQuaternion {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Quaternion of a rotation matrix. The sign is chosen so that `w ≥ 0`.
    pub fn from_rotation(rotation: &Matrix3<f64>) -> Self {
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            *rotation,
        ));
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        UnitQuaternion {
            w: s * q.w,
            x: s * q.i,
            y: s * q.j,
            z: s * q.k,
        }
    }

    pub fn to_rotation(&self) -> Matrix3<f64> {
        quat_to_rotation(self)
    }

    pub fn negated(&self) -> Self {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Rotation matrix of a unit quaternion.
///
/// Only pairwise products of components appear, so `q` and `-q` give
/// bit-identical matrices.
pub fn quat_to_rotation(q: &UnitQuaternion) -> Matrix3<f64> {
    let UnitQuaternion { w, x, y, z } = *q;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// Rigid transform `p ↦ R·p + t`.
///
/// `convention` is `Some` for camera poses and `None` for plain rigid motions
/// inside one frame (ICP estimates, turntable steps, synthetic perturbations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    convention: Option<PoseConvention>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            convention: None,
        }
    }

    /// Validates `R` (orthonormal, det +1, within [`RIGID_TOL`]) and builds the transform.
    pub fn from_parts(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        Self::from_parts_with_tol(rotation, translation, RIGID_TOL)
    }

    pub fn from_parts_with_tol(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self, GeometryError> {
        check_rotation(&rotation, tol)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotRigid("non-finite translation".into()));
        }
        Ok(RigidTransform {
            rotation,
            translation,
            convention: None,
        })
    }

    /// For rotations produced by this crate's own arithmetic.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
            convention: None,
        }
    }

    pub fn from_quaternion(q: &UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self::from_parts_unchecked(q.to_rotation(), translation)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), translation)
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized) through the origin.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::from_parts_unchecked(rot.into_inner(), Vector3::zeros())
    }

    /// Parses a 4×4 homogeneous matrix. The bottom row must be exactly `[0 0 0 1]`.
    pub fn from_matrix(m: &Matrix4<f64>, tol: f64) -> Result<Self, GeometryError> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::NotRigid(format!(
                "bottom row {bottom:?} is not [0, 0, 0, 1]"
            )));
        }
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::from_parts_with_tol(rotation, translation, tol)
    }

    pub fn with_convention(mut self, convention: PoseConvention) -> Self {
        self.convention = Some(convention);
        self
    }

    pub fn untagged(mut self) -> Self {
        self.convention = None;
        self
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn convention(&self) -> Option<PoseConvention> {
        self.convention
    }

    /// Homogeneous 4×4 view; the bottom row is exactly `[0 0 0 1]`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Block inverse `[Rᵀ | −Rᵀt]`. A pose tag is flipped.
    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
            convention: self.convention.map(PoseConvention::flipped),
        }
    }

    /// `self · inner`: apply `inner` first, then `self`.
    ///
    /// Untagged motions compose with anything and inherit the pose tag.
    /// Two poses chain only when one undoes the other's frame change
    /// (`T_wc · T_cw` or `T_cw · T_wc`), which yields an untagged motion.
    pub fn compose(&self, inner: &RigidTransform) -> Result<Self, GeometryError> {
        let convention = match (self.convention, inner.convention) {
            (None, c) | (c, None) => c,
            (Some(a), Some(b)) if a != b => None,
            (Some(a), Some(b)) => {
                return Err(GeometryError::FrameMismatch {
                    outer: format!("{a:?}"),
                    inner: format!("{b:?}"),
                })
            }
        };
        Ok(RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
            convention,
        })
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_point(&self, p: &nalgebra::Point3<f64>) -> nalgebra::Point3<f64> {
        nalgebra::Point3::from(self.apply(&p.coords))
    }

    /// Largest absolute entry-wise difference between the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        (self.matrix() - other.matrix()).amax()
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl fmt::Display for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.matrix();
        for r in 0..4 {
            writeln!(
                f,
                "[{:+.9} {:+.9} {:+.9} {:+.9}]",
                m[(r, 0)],
                m[(r, 1)],
                m[(r, 2)],
                m[(r, 3)]
            )?;
        }
        Ok(())
    }
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<(), GeometryError> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NotRigid("non-finite rotation".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    if ortho > tol {
        return Err(GeometryError::NotRigid(format!(
            "RᵀR deviates from identity by {ortho:e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(GeometryError::NotRigid(format!("det(R) = {det}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn rz90() -> Matrix3<f64> {
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn identity_quaternion() {
        assert_eq!(
            quat_to_rotation(&UnitQuaternion::IDENTITY),
            Matrix3::identity()
        );
    }

    #[test]
    fn quarter_turn_about_z() {
        let h = SQRT_2 / 2.0;
        let q = UnitQuaternion::new(h, 0.0, 0.0, h).unwrap();
        assert!((quat_to_rotation(&q) - rz90()).amax() < 1e-15);
    }

    #[test]
    fn half_turn_about_x() {
        let q = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            quat_to_rotation(&q),
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
        );
    }

    #[test]
    fn quaternion_norm_gate() {
        assert!(UnitQuaternion::new(1.0 + 5e-7, 0.0, 0.0, 0.0).is_ok());
        let q = UnitQuaternion::new(1.0 + 5e-7, 0.0, 0.0, 0.0).unwrap();
        assert!((q.w - 1.0).abs() < 1e-15);
        assert!(matches!(
            UnitQuaternion::new(1.1, 0.0, 0.0, 0.0),
            Err(GeometryError::NonUnitQuaternion { .. })
        ));
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn invert_block_formula() {
        let t = RigidTransform::from_parts(rz90(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let inv = t.invert();
        assert!((inv.rotation() - rz90().transpose()).amax() < 1e-15);
        assert!((inv.translation() - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-15);
        // generic numeric inverse as cross-check
        let generic = t.matrix().try_inverse().unwrap();
        assert!((inv.matrix() - generic).amax() < 1e-12);
        assert_eq!(
            RigidTransform::identity().invert(),
            RigidTransform::identity()
        );
    }

    #[test]
    fn invert_flips_tag() {
        let t = RigidTransform::identity().with_convention(PoseConvention::WorldToCamera);
        assert_eq!(t.invert().convention(), Some(PoseConvention::CameraToWorld));
    }

    #[test]
    fn compose_rules() {
        let a = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::from_translation(Vector3::new(0.0, 2.0, 0.0));
        let ab = a.compose(&b).unwrap();
        assert_eq!(*ab.translation(), Vector3::new(1.0, 2.0, 0.0));
        assert_eq!(RigidTransform::identity().compose(&b).unwrap(), b);

        let cw = RigidTransform::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7)
            .compose(&a)
            .unwrap()
            .with_convention(PoseConvention::WorldToCamera);
        let round = cw.compose(&cw.invert()).unwrap();
        assert!(round.max_abs_diff(&RigidTransform::identity()) < 1e-12);
        assert_eq!(round.convention(), None);
        assert!(matches!(
            cw.compose(&cw),
            Err(GeometryError::FrameMismatch { .. })
        ));
        let moved = a.compose(&cw).unwrap();
        assert_eq!(moved.convention(), Some(PoseConvention::WorldToCamera));
    }

    #[test]
    fn apply_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().apply(&p), p);
        let t = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 5.0));
        assert_eq!(t.apply(&Vector3::zeros()), Vector3::new(0.0, 0.0, 5.0));
        let r = RigidTransform::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        assert!((r.apply(&Vector3::x()) - Vector3::y()).amax() < 1e-15);
    }

    #[test]
    fn from_matrix_rejects_bad_input() {
        let mut m = Matrix4::identity();
        m[(3, 3)] = 2.0;
        assert!(RigidTransform::from_matrix(&m, RIGID_TOL).is_err());
        let mut m = Matrix4::identity();
        m[(0, 0)] = -1.0;
        assert!(RigidTransform::from_matrix(&m, RIGID_TOL).is_err());
        let mut m = Matrix4::identity();
        m[(0, 1)] = 1e-3;
        assert!(RigidTransform::from_matrix(&m, RIGID_TOL).is_err());
    }

    fn quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| {
                w * w + x * x + y * y + z * z > 1e-3
            })
            .prop_map(|(w, x, y, z)| {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                UnitQuaternion::new(w / n, x / n, y / n, z / n).unwrap()
            })
    }

    fn rigid() -> impl Strategy<Value = RigidTransform> {
        (quat(), -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
            .prop_map(|(q, x, y, z)| RigidTransform::from_quaternion(&q, Vector3::new(x, y, z)))
    }

    proptest! {
        #[test]
        fn quaternion_sign_is_irrelevant(q in quat()) {
            prop_assert_eq!(quat_to_rotation(&q), quat_to_rotation(&q.negated()));
        }

        #[test]
        fn rotation_is_orthonormal(q in quat()) {
            let r = quat_to_rotation(&q);
            prop_assert!(check_rotation(&r, 1e-12).is_ok());
        }

        #[test]
        fn quaternion_roundtrip(q in quat()) {
            let back = UnitQuaternion::from_rotation(&q.to_rotation());
            prop_assert!((back.to_rotation() - q.to_rotation()).amax() < 1e-12);
        }

        #[test]
        fn isometry(t in rigid(), a in prop::array::uniform3(-5.0..5.0f64), b in prop::array::uniform3(-5.0..5.0f64)) {
            let (a, b) = (Vector3::from(a), Vector3::from(b));
            let d0 = (a - b).norm();
            let d1 = (t.apply(&a) - t.apply(&b)).norm();
            prop_assert!((d0 - d1).abs() < 1e-9);
        }

        #[test]
        fn compose_matches_matrix_product(a in rigid(), b in rigid()) {
            let ab = a.compose(&b).unwrap();
            prop_assert!((ab.matrix() - a.matrix() * b.matrix()).amax() < 1e-12);
        }
    }
}
