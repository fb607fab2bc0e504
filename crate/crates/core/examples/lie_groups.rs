//! Exponential and logarithm maps, averaging and IGSO(3) sampling.
use kitbash::liegroup::{
    geodesic_norm, igso3_sample, lie_mean, relative_angle, se3_exp, se3_log, Igso3Params, Twist,
};
use kitbash::{Rotation, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kitbash::Result<()> {
    let twist = Twist::new(Vec3::new(0.3, -0.2, 0.9), Vec3::new(1.0, 0.5, -0.25));
    let t = se3_exp(&twist);
    let back = se3_log(&t)?;
    println!("rotation angle {:.4} rad, roundtrip error {:.2e}", t.rotation.angle(), (back.0 - twist.0).norm());

    // A small cloud around `t`; its mean lands back near `t`.
    let cloud: Vec<_> = [-1.0, -0.5, 0.5, 1.0]
        .iter()
        .map(|s| t * se3_exp(&Twist::new(Vec3::new(0.05 * s, 0.0, 0.0), Vec3::new(0.0, 0.02 * s, 0.0))))
        .collect();
    println!("mean is {:.2e} from the center", geodesic_norm(&lie_mean(&cloud)?, &t)?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for scale in [0.1, 0.5, 1.0] {
        let params = Igso3Params::new(scale);
        let n = 2000;
        let mean: f64 = (0..n)
            .map(|_| relative_angle(&igso3_sample(&params, &mut rng).unwrap(), &Rotation::identity()))
            .sum::<f64>()
            / n as f64;
        println!("igso3 scale {scale}: mean angle {mean:.3} rad");
    }
    Ok(())
}
