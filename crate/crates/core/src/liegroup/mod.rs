//! Rotation and rigid-motion groups.
//!
//! Exponential and logarithm maps for SO(3) and SE(3), the geodesic norm
//! `|Log(A^-1 B)|`, chart-based Lie-algebra averaging, and the isotropic
//! Gaussian on SO(3) that serves as the rotational transition kernel of the
//! sampler. Twists are ordered `(omega, rho)`.

mod igso3;
mod se3;
mod so3;

pub use igso3::{
    igso3_angle_density, igso3_density, igso3_log_density, igso3_log_density_angle,
    igso3_log_density_grad, igso3_sample, relative_angle, Igso3Params, Igso3Sampler, CDF_BINS,
    DEFAULT_SERIES_TERMS, GRAD_ANGLE_LIMIT, GRAD_STEP, SERIES_MIN_SCALE,
};
pub use se3::{
    geodesic_norm, lie_mean, lie_mean_refined, se3_exp, se3_log, RigidTransform, TransformRecord, Twist,
    LOG_ANGLE_LIMIT,
};
pub use so3::{hat, so3_exp, so3_log, vee, Mat3, Rotation, Vec3};
