use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix4, Vector6};

use super::so3::{hat, so3_exp, so3_log, Mat3, Rotation, Vec3};
use crate::error::{Error, Result};

/// Relative angle beyond which the SE(3) logarithm is refused.
pub const LOG_ANGLE_LIMIT: f64 = PI - 1e-6;

/// Lie-algebra coordinates of SE(3): rotational part first, then translational.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist(pub Vector6<f64>);

impl Twist {
    pub fn new(omega: Vec3, rho: Vec3) -> Self {
        Twist(Vector6::new(omega.x, omega.y, omega.z, rho.x, rho.y, rho.z))
    }

    pub fn zero() -> Self {
        Twist(Vector6::zeros())
    }

    pub fn omega(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn rho(&self) -> Vec3 {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// File form of a rigid motion: axis-angle rotation vector plus translation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRecord {
    pub rotation_axis_angle: [f64; 3],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for TransformRecord {
    fn from(t: &RigidTransform) -> Self {
        let w = so3_log(&t.rotation);
        Self {
            rotation_axis_angle: [w.x, w.y, w.z],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<&TransformRecord> for RigidTransform {
    fn from(r: &TransformRecord) -> Self {
        RigidTransform::from_axis_angle_translation(
            Vec3::from(r.rotation_axis_angle),
            Vec3::from(r.translation),
        )
    }
}

/// Rigid motion `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(r, Vec3::zeros())
    }

    /// Rotation given as an axis-angle vector, as used by the file formats.
    pub fn from_axis_angle_translation(axis_angle: Vec3, translation: Vec3) -> Self {
        Self::new(so3_exp(&axis_angle), translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.inverse();
        Self::new(rt, -rt.apply(&self.translation))
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.apply(v)
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn exp(t: &Twist) -> Self {
        se3_exp(t)
    }

    pub fn log(&self) -> Result<Twist> {
        se3_log(self)
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * rhs.rotation,
            self.rotation.apply(&rhs.translation) + self.translation,
        )
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        *self * *rhs
    }
}

/// The left Jacobian `V` of SO(3), mapping `rho` to the translation of `exp`.
fn left_jacobian(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let k = hat(omega);
    let (b, c) = if theta2 < 1e-8 {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Mat3::identity() + k * b + k * k * c
}

fn left_jacobian_inverse(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let k = hat(omega);
    let d = if theta2 < 1e-8 {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        let theta = theta2.sqrt();
        let half = 0.5 * theta;
        // 1/theta^2 - cot(theta/2) / (2 theta)
        (1.0 - half * half.cos() / half.sin()) / theta2
    };
    Mat3::identity() - k * 0.5 + k * k * d
}

pub fn se3_exp(t: &Twist) -> RigidTransform {
    let omega = t.omega();
    RigidTransform::new(so3_exp(&omega), left_jacobian(&omega) * t.rho())
}

/// Inverse of [`se3_exp`]; refused when the rotation angle reaches
/// [`LOG_ANGLE_LIMIT`].
pub fn se3_log(x: &RigidTransform) -> Result<Twist> {
    let angle = x.rotation.angle();
    if angle >= LOG_ANGLE_LIMIT {
        return Err(Error::AngleNearPi { angle });
    }
    let omega = so3_log(&x.rotation);
    let rho = left_jacobian_inverse(&omega) * x.translation;
    Ok(Twist::new(omega, rho))
}

/// `|Log(A^-1 B)|`.
pub fn geodesic_norm(a: &RigidTransform, b: &RigidTransform) -> Result<f64> {
    Ok(se3_log(&(a.inverse() * *b))?.norm())
}

/// One-shot Lie-algebra average in the chart of the first element:
/// `T0 * Exp(mean_i Log(T0^-1 Ti))`.
pub fn lie_mean(transforms: &[RigidTransform]) -> Result<RigidTransform> {
    let base = *transforms
        .first()
        .ok_or(Error::EmptyInput("lie_mean needs at least one transform"))?;
    chart_mean(&base, transforms)
}

/// [`lie_mean`] followed by up to `iterations` re-centering passes, each one
/// re-expressing the average in the chart of the previous estimate. This is
/// the fixed-point iteration of the Karcher mean.
pub fn lie_mean_refined(transforms: &[RigidTransform], iterations: usize) -> Result<RigidTransform> {
    let mut mean = lie_mean(transforms)?;
    for _ in 0..iterations.min(5) {
        let next = chart_mean(&mean, transforms)?;
        let step = geodesic_norm(&mean, &next)?;
        mean = next;
        if step < 1e-14 {
            break;
        }
    }
    Ok(mean)
}

fn chart_mean(base: &RigidTransform, transforms: &[RigidTransform]) -> Result<RigidTransform> {
    let inv = base.inverse();
    let mut acc = Vector6::zeros();
    for t in transforms {
        acc += se3_log(&(inv * *t))?.0;
    }
    acc /= transforms.len() as f64;
    Ok(*base * se3_exp(&Twist(acc)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_translation_twist() {
        let t = se3_exp(&Twist::new(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)));
        assert_eq!(t.rotation, Rotation::identity());
        assert_eq!(t.translation, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn identity_log_is_zero() {
        assert_eq!(se3_log(&RigidTransform::identity()).unwrap(), Twist::zero());
    }

    #[test]
    fn log_refuses_near_pi() {
        let x = RigidTransform::from_rotation(so3_exp(&Vec3::new(0.0, 0.0, PI - 1e-7)));
        assert!(matches!(se3_log(&x), Err(Error::AngleNearPi { .. })));
    }

    #[test]
    fn geodesic_norm_examples() {
        let a = RigidTransform::from_axis_angle_translation(
            Vec3::new(0.1, 0.2, 0.3),
            Vec3::new(1.0, 0.0, 0.0),
        );
        assert_eq!(geodesic_norm(&a, &a).unwrap(), 0.0);
        let b = RigidTransform::from_translation(Vec3::new(3.0, 4.0, 0.0));
        let d = geodesic_norm(&RigidTransform::identity(), &b).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn mean_of_translations_is_midpoint() {
        let m = lie_mean(&[
            RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)),
            RigidTransform::from_translation(Vec3::new(3.0, 0.0, 0.0)),
        ])
        .unwrap();
        assert!((m.translation - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mean_rejects_empty() {
        assert!(matches!(lie_mean(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn homogeneous_matrix_layout() {
        let t = RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let m = t.matrix();
        assert_eq!(m[(0, 3)], 1.0);
        assert_eq!(m[(2, 3)], 3.0);
        assert_eq!(m[(3, 3)], 1.0);
    }
}
