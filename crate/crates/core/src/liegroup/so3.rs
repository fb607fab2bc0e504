use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// Element of SO(3), stored as an orthonormal 3x3 matrix with determinant +1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix after checking orthonormality and orientation.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let err = (m.transpose() * m - Mat3::identity()).abs().max();
        if !err.is_finite() || err > ORTHO_TOL {
            return Err(Error::InvalidRotation(format!(
                "|R^T R - I| = {err:e} exceeds {ORTHO_TOL:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det} != 1")));
        }
        Ok(Rotation(m))
    }

    #[cfg(test)]
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        so3_exp(&(axis * (angle / n)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn exp(omega: &Vec3) -> Self {
        so3_exp(omega)
    }

    pub fn log(&self) -> Vec3 {
        so3_log(self)
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let s = 0.5 * vee(&(m - m.transpose())).norm();
        let c = 0.5 * (m.trace() - 1.0);
        s.atan2(c)
    }

    /// Largest deviation of `R^T R` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }

    /// Projects back onto SO(3) with a symmetric (polar) correction.
    pub fn orthonormalized(&self) -> Self {
        let m = self.0;
        // One Newton step of the polar decomposition is enough for the drift
        // accumulated over a few hundred compositions.
        let inv_t = m.try_inverse().map(|i| i.transpose()).unwrap_or(m);
        let mut r = 0.5 * (m + inv_t);
        for _ in 0..2 {
            let inv_t = r.try_inverse().map(|i| i.transpose()).unwrap_or(r);
            r = 0.5 * (r + inv_t);
        }
        Rotation(r)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Rodrigues map from a rotation vector (radians) to SO(3).
pub fn so3_exp(omega: &Vec3) -> Rotation {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(omega);
    let (a, b) = if theta < 1e-4 {
        // sin(t)/t and (1 - cos t)/t^2 by Taylor series
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// Principal logarithm with angle in [0, pi].
///
/// At exactly pi the axis sign is fixed so that its largest-magnitude
/// component is positive.
pub fn so3_log(r: &Rotation) -> Vec3 {
    let m = r.matrix();
    let skew = 0.5 * vee(&(m - m.transpose()));
    let s = skew.norm();
    let c = 0.5 * (m.trace() - 1.0);
    let theta = s.atan2(c);

    if theta < 1e-4 {
        // theta / sin(theta) ~ 1 + theta^2 / 6
        return skew * (1.0 + theta * theta / 6.0);
    }
    if c > -0.9 {
        return skew * (theta / s);
    }

    // Near pi: recover the axis from the symmetric part, which is
    // (1 - cos theta) a a^T once cos(theta) I is removed.
    let sym = 0.5 * (m + m.transpose()) - Mat3::identity() * c;
    let diag = sym.diagonal();
    let mut col = 0;
    for i in 1..3 {
        if diag[i] > diag[col] {
            col = i;
        }
    }
    let mut axis: Vec3 = sym.column(col).into_owned();
    let n = axis.norm();
    if n == 0.0 {
        return Vec3::zeros();
    }
    axis /= n;
    let d = axis.dot(&skew);
    if d < 0.0 || (d == 0.0 && canonical_sign(&axis) < 0.0) {
        axis = -axis;
    }
    if s < 1e-12 {
        // Exact antipode: the skew part carries no sign information.
        if canonical_sign(&axis) < 0.0 {
            axis = -axis;
        }
        return axis * PI;
    }
    axis * theta
}

fn canonical_sign(axis: &Vec3) -> f64 {
    let mut k = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[k].abs() {
            k = i;
        }
    }
    axis[k].signum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(so3_exp(&Vec3::zeros()), Rotation::identity());
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = so3_exp(&Vec3::new(PI / 2.0, 0.0, 0.0));
        let v = r.apply(&Vec3::new(0.0, 1.0, 0.0));
        assert!((v - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(so3_log(&Rotation::identity()), Vec3::zeros());
    }

    #[test]
    fn antipodal_log_uses_positive_dominant_axis() {
        let r = Rotation::from_matrix(Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0))).unwrap();
        let w = so3_log(&r);
        assert!((w - Vec3::new(0.0, 0.0, PI)).norm() < 1e-12, "{w}");
        let r = so3_exp(&Vec3::new(0.0, -PI, 0.0));
        let w = so3_log(&r);
        assert!((w - Vec3::new(0.0, PI, 0.0)).norm() < 1e-9, "{w}");
    }

    #[test]
    fn roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let dir = Vec3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
            .normalize();
            let angle = rng.random_range(1e-6..PI - 1e-3);
            let w = dir * angle;
            let back = so3_log(&so3_exp(&w));
            assert!((back - w).norm() < 1e-9, "{w} -> {back}");
        }
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let m = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(m).is_err());
    }

    #[test]
    fn orthonormalize_removes_drift() {
        let r = so3_exp(&Vec3::new(0.3, -0.2, 0.9));
        let drifted = Rotation::from_matrix_unchecked(r.matrix() * 1.001 + Mat3::repeat(1e-4));
        let fixed = drifted.orthonormalized();
        assert!(fixed.orthonormality_error() < 1e-12);
        assert!((fixed.matrix() - r.matrix()).abs().max() < 1e-3);
    }
}
