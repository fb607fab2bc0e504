//! Isotropic Gaussian distribution on SO(3).
//!
//! The density with respect to the normalized Haar measure depends only on
//! the rotation angle `w` and is the heat-kernel character series
//!
//! ```text
//! f(w) = sum_l (2l + 1) exp(-l (l + 1) s^2 / 2) sin((l + 1/2) w) / sin(w / 2)
//! ```
//!
//! where `s` is the scale. For small `s` the rotation vector is close to
//! `N(0, s^2 I)`; below [`SERIES_MIN_SCALE`] that Gaussian limit is used
//! directly because the series would need thousands of terms.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::so3::{so3_exp, so3_log, Rotation, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_SERIES_TERMS: usize = 200;
pub const SERIES_MIN_SCALE: f64 = 0.05;
pub const CDF_BINS: usize = 4096;
pub const GRAD_STEP: f64 = 1e-5;
/// Relative angle beyond which the log-density gradient is refused.
pub const GRAD_ANGLE_LIMIT: f64 = PI - 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Igso3Params {
    pub scale: f64,
    pub series_terms: usize,
}

impl Igso3Params {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            series_terms: DEFAULT_SERIES_TERMS,
        }
    }

    fn uses_series(&self) -> bool {
        self.scale >= SERIES_MIN_SCALE
    }
}

/// `w^2 / (1 - cos w)`, stable at zero.
fn angle_jacobian_ratio(w: f64) -> f64 {
    if w < 1e-4 {
        2.0 + w * w / 6.0
    } else {
        let h = (0.5 * w).sin();
        w * w / (2.0 * h * h)
    }
}

fn series_density(w: f64, params: &Igso3Params) -> f64 {
    let e2 = params.scale * params.scale;
    let half = 0.5 * w;
    let sh = half.sin();
    let small = sh.abs() < 1e-12;
    // sin((l + 1/2) w) by angle-addition recurrence
    let (sw, cw) = w.sin_cos();
    let (mut s, mut c) = half.sin_cos();
    let mut sum = 0.0;
    for l in 0..params.series_terms {
        let lf = l as f64;
        let decay = (-lf * (lf + 1.0) * e2 / 2.0).exp();
        if decay < 1e-18 {
            break;
        }
        let ratio = if small { 2.0 * lf + 1.0 } else { s / sh };
        sum += (2.0 * lf + 1.0) * decay * ratio;
        let s_next = s * cw + c * sw;
        c = c * cw - s * sw;
        s = s_next;
    }
    sum
}

fn gaussian_log_density(w: f64, scale: f64) -> f64 {
    // Maxwell angle law divided by the Haar angle marginal (1 - cos w) / pi.
    let e2 = scale * scale;
    (4.0 * PI * PI).ln() + angle_jacobian_ratio(w).ln()
        - 1.5 * (2.0 * PI * e2).ln()
        - w * w / (2.0 * e2)
}

/// Density with respect to the normalized Haar measure at rotation angle `w`.
pub fn igso3_density(w: f64, params: &Igso3Params) -> f64 {
    if params.uses_series() {
        series_density(w, params).max(0.0)
    } else {
        gaussian_log_density(w, params.scale).exp()
    }
}

pub fn igso3_log_density_angle(w: f64, params: &Igso3Params) -> f64 {
    if params.uses_series() {
        series_density(w, params).max(f64::MIN_POSITIVE).ln()
    } else {
        gaussian_log_density(w, params.scale)
    }
}

/// Marginal density of the rotation angle on [0, pi].
pub fn igso3_angle_density(w: f64, params: &Igso3Params) -> f64 {
    if params.uses_series() {
        (1.0 - w.cos()) / PI * igso3_density(w, params)
    } else {
        let e2 = params.scale * params.scale;
        4.0 * PI * w * w * (2.0 * PI * e2).powf(-1.5) * (-w * w / (2.0 * e2)).exp()
    }
}

/// Log density of `r` under the kernel centered at `base`.
pub fn igso3_log_density(r: &Rotation, base: &Rotation, params: &Igso3Params) -> f64 {
    let rel = r * &base.inverse();
    igso3_log_density_angle(rel.angle(), params)
}

/// Gradient of [`igso3_log_density`] with respect to a left perturbation
/// `Exp(d) * r`, by central differences with step [`GRAD_STEP`].
pub fn igso3_log_density_grad(r: &Rotation, base: &Rotation, params: &Igso3Params) -> Result<Vec3> {
    let rel = r * &base.inverse();
    let angle = rel.angle();
    if angle >= GRAD_ANGLE_LIMIT {
        return Err(Error::AngleNearPi { angle });
    }
    let mut g = Vec3::zeros();
    for j in 0..3 {
        let mut d = Vec3::zeros();
        d[j] = GRAD_STEP;
        let plus = igso3_log_density_angle((so3_exp(&d) * rel).angle(), params);
        let minus = igso3_log_density_angle((so3_exp(&-d) * rel).angle(), params);
        g[j] = (plus - minus) / (2.0 * GRAD_STEP);
    }
    Ok(g)
}

/// Inverse-CDF sampler for one parameter setting. Building the table costs a
/// few thousand density evaluations, so callers drawing many samples at the
/// same scale should keep one of these around.
#[derive(Clone, Debug)]
pub struct Igso3Sampler {
    params: Igso3Params,
    max_angle: f64,
    cdf: Vec<f64>,
}

impl Igso3Sampler {
    pub fn new(params: Igso3Params) -> Result<Self> {
        if !(params.scale > 0.0) || !params.scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "IGSO(3) scale must be positive, got {}",
                params.scale
            )));
        }
        if params.series_terms == 0 {
            return Err(Error::InvalidConfig("series_terms must be positive".into()));
        }
        // Beyond 12 scales the mass is below 1e-30; keep table resolution there.
        let max_angle = (12.0 * params.scale).min(PI);
        let h = max_angle / CDF_BINS as f64;
        let mut cdf = Vec::with_capacity(CDF_BINS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut left = igso3_angle_density(0.0, &params);
        for i in 0..CDF_BINS {
            let a = i as f64 * h;
            let mid = igso3_angle_density(a + 0.5 * h, &params);
            let right = igso3_angle_density(a + h, &params);
            acc += h / 6.0 * (left + 4.0 * mid + right);
            cdf.push(acc);
            left = right;
        }
        let total = acc;
        if !(total > 0.0) {
            return Err(Error::InvalidConfig("IGSO(3) angle density has no mass".into()));
        }
        for v in &mut cdf {
            *v /= total;
        }
        Ok(Self {
            params,
            max_angle,
            cdf,
        })
    }

    pub fn params(&self) -> &Igso3Params {
        &self.params
    }

    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_BINS);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let h = self.max_angle / CDF_BINS as f64;
        ((idx - 1) as f64 + frac.clamp(0.0, 1.0)) * h
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let axis = loop {
            let v = Vec3::new(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            );
            let n = v.norm();
            if n > 1e-12 {
                break v / n;
            }
        };
        let angle = self.sample_angle(rng);
        so3_exp(&(axis * angle))
    }
}

/// Single draw; builds a fresh table. Use [`Igso3Sampler`] for repeated draws.
pub fn igso3_sample<R: Rng + ?Sized>(params: &Igso3Params, rng: &mut R) -> Result<Rotation> {
    Ok(Igso3Sampler::new(*params)?.sample(rng))
}

/// Angle of the relative rotation, used by tests and diagnostics.
pub fn relative_angle(r: &Rotation, base: &Rotation) -> f64 {
    so3_log(&(r * &base.inverse())).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn density_normalizes() {
        for scale in [0.1, 0.5, 1.0] {
            let p = Igso3Params::new(scale);
            let mass = simpson(|w| igso3_angle_density(w, &p), 0.0, PI, 20000);
            assert!((mass - 1.0).abs() < 1e-3, "scale {scale}: {mass}");
        }
    }

    #[test]
    fn small_scale_concentrates() {
        let s = Igso3Sampler::new(Igso3Params::new(1e-3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean: f64 = (0..10_000).map(|_| s.sample(&mut rng).angle()).sum::<f64>() / 1e4;
        assert!(mean < 1e-2, "{mean}");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let p = Igso3Params::new(0.4);
        let a = igso3_sample(&p, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = igso3_sample(&p, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_vanishes_at_mode() {
        let base = so3_exp(&Vec3::new(0.2, -0.4, 0.1));
        let g = igso3_log_density_grad(&base, &base, &Igso3Params::new(0.5)).unwrap();
        assert!(g.norm() < 1e-6, "{g}");
    }

    #[test]
    fn gradient_refused_near_pi() {
        let r = so3_exp(&Vec3::new(0.0, 0.0, PI - 1e-4));
        let res = igso3_log_density_grad(&r, &Rotation::identity(), &Igso3Params::new(0.5));
        assert!(matches!(res, Err(Error::AngleNearPi { .. })));
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(Igso3Sampler::new(Igso3Params::new(0.0)).is_err());
    }
}
