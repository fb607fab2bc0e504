use super::bvh::Bvh;
use super::mesh::TriMesh;
use super::sampling::{sample_surface, FIXED_SAMPLE_SEED};
use crate::error::Result;
use crate::liegroup::{RigidTransform, Vec3};

/// Samples per mesh for chamfer distances.
pub const CHAMFER_SAMPLES: usize = 1024;

/// Symmetric chamfer distance `(mean d(a, B) + mean d(b, A)) / 2` over
/// fixed-seed surface samples.
pub fn mesh_distance(a: &TriMesh, b: &TriMesh) -> Result<f64> {
    let sa = sample_surface(a, CHAMFER_SAMPLES, FIXED_SAMPLE_SEED)?;
    let sb = sample_surface(b, CHAMFER_SAMPLES, FIXED_SAMPLE_SEED)?;
    let ba = Bvh::new(a.clone());
    let bb = Bvh::new(b.clone());
    let ab: f64 = sa.iter().map(|s| bb.distance(&s.position)).sum::<f64>() / sa.len() as f64;
    let ba_: f64 = sb.iter().map(|s| ba.distance(&s.position)).sum::<f64>() / sb.len() as f64;
    Ok(0.5 * (ab + ba_))
}

/// Chamfer distance between two point clouds, brute force.
pub fn point_cloud_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_way = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (one_way(a, b) + one_way(b, a))
}

/// A mesh placed in the world by a rigid transform, sharing its BVH.
#[derive(Clone, Copy, Debug)]
pub struct Placed<'a> {
    pub bvh: &'a Bvh,
    pub pose: RigidTransform,
}

impl<'a> Placed<'a> {
    pub fn new(bvh: &'a Bvh, pose: RigidTransform) -> Self {
        Self { bvh, pose }
    }

    /// Distance from a world point to the placed surface.
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.bvh.distance(&self.pose.inverse().apply_point(p))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.bvh.contains(&self.pose.inverse().apply_point(p))
    }

    /// Surface crossing between two placed meshes.
    pub fn intersects(&self, other: &Placed) -> bool {
        let rel = self.pose.inverse() * other.pose;
        self.bvh.intersects(other.bvh, &rel)
    }
}

/// Approximate minimum surface gap: 0 when the surfaces cross, otherwise the
/// smallest distance from vertices and `extra` samples of either mesh to the
/// other.
pub fn surface_gap(a: &Placed, b: &Placed, extra: usize) -> f64 {
    if a.intersects(b) {
        return 0.0;
    }
    let one_way = |x: &Placed, y: &Placed| {
        let rel = y.pose.inverse() * x.pose;
        let mesh = x.bvh.mesh();
        let mut best = f64::INFINITY;
        for v in mesh.vertices() {
            best = best.min(y.bvh.distance(&rel.apply_point(v)));
        }
        if extra > 0 {
            for s in sample_surface(mesh, extra, FIXED_SAMPLE_SEED).expect("positive count") {
                best = best.min(y.bvh.distance(&rel.apply_point(&s.position)));
            }
        }
        best
    };
    one_way(a, b).min(one_way(b, a))
}

/// Mesh-level convenience over [`Bvh::intersects`].
pub fn intersects(a: &TriMesh, b: &TriMesh) -> bool {
    Bvh::new(a.clone()).intersects(&Bvh::new(b.clone()), &RigidTransform::identity())
}

pub fn point_inside(mesh: &Bvh, p: &Vec3) -> bool {
    mesh.contains(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn self_distance_zero_and_symmetric() {
        let a = primitives::icosphere(Vec3::zeros(), 1.0, 2);
        let b = primitives::unit_cube();
        assert!(mesh_distance(&a, &a).unwrap() < 1e-9);
        assert_eq!(
            mesh_distance(&a, &b).unwrap(),
            mesh_distance(&b, &a).unwrap()
        );
    }

    #[test]
    fn gap_between_cubes() {
        let cube = Bvh::new(primitives::unit_cube());
        let a = Placed::new(&cube, RigidTransform::identity());
        let b = Placed::new(&cube, RigidTransform::from_translation(Vec3::new(1.25, 0.3, 0.0)));
        assert!((surface_gap(&a, &b, 0) - 0.25).abs() < 1e-12);
        let c = Placed::new(&cube, RigidTransform::from_translation(Vec3::new(0.5, 0.0, 0.0)));
        assert_eq!(surface_gap(&a, &c, 0), 0.0);
    }
}
