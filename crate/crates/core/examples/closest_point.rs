//! BVH closest-point queries against the brute-force answer, and the
//! vector distance field used by attachment.
use kitbash::geometry::{compute_vdf, primitives, sample_surface, Bvh};
use kitbash::Vec3;
use std::time::Instant;

fn main() -> kitbash::Result<()> {
    let sphere = primitives::icosphere(Vec3::zeros(), 1.0, 4);
    let bvh = Bvh::new(sphere.clone());
    println!("{} faces in {} leaves", sphere.faces().len(), bvh.leaf_count());

    let queries: Vec<Vec3> = (0..500)
        .map(|i| {
            let t = i as f64 * 0.37;
            Vec3::new(t.cos(), (1.3 * t).sin(), (0.7 * t).cos()) * 1.5
        })
        .collect();
    let start = Instant::now();
    let fast: Vec<_> = queries.iter().map(|q| bvh.closest_point(q)).collect();
    let bvh_time = start.elapsed();
    let start = Instant::now();
    let slow: Vec<_> = queries.iter().map(|q| bvh.brute_force_closest_point(q)).collect();
    let brute_time = start.elapsed();
    let worst = fast.iter().zip(&slow).map(|(a, b)| (a.point - b.point).norm()).fold(0.0, f64::max);
    println!("bvh {bvh_time:?}, brute force {brute_time:?}, largest disagreement {worst:.1e}");

    // Offsets from a small cube's surface to the sphere.
    let cube = primitives::cuboid(Vec3::repeat(-0.2), Vec3::repeat(0.2), 2);
    let samples = sample_surface(&cube, 200, 1)?;
    let vdf = compute_vdf(&samples, &bvh)?;
    let mean = vdf.offsets.iter().map(|v| v.norm()).sum::<f64>() / vdf.len() as f64;
    println!("{} vdf samples, mean offset length {mean:.4}", vdf.len());
    Ok(())
}
