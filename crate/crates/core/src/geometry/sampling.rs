use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::liegroup::{RigidTransform, Vec3};

/// Vertex budget above which VDF sources switch from vertices to area samples.
pub const VDF_MAX_SAMPLES: usize = 2000;
/// Seed used for every internally drawn sample set.
pub const FIXED_SAMPLE_SEED: u64 = 0x005e_ed0f_5a3e;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub position: Vec3,
    pub face_index: usize,
    pub barycentric: Vec3,
}

impl SurfaceSample {
    /// Re-evaluates the position on a mesh sharing this sample's topology.
    pub fn on(&self, mesh: &TriMesh) -> Vec3 {
        let [a, b, c] = mesh.triangle(self.face_index);
        a * self.barycentric.x + b * self.barycentric.y + c * self.barycentric.z
    }

    pub fn transformed(&self, t: &RigidTransform) -> SurfaceSample {
        SurfaceSample {
            position: t.apply_point(&self.position),
            ..*self
        }
    }
}

/// Area-weighted stratified samples. When `count` reaches the vertex count,
/// every referenced vertex is emitted first and the remainder is drawn by area.
pub fn sample_surface(mesh: &TriMesh, count: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    if count == 0 {
        return Err(Error::InvalidMesh("sample count must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(count);
    let nv = mesh.vertices().len();
    if count >= nv {
        let mut owner: Vec<Option<(usize, usize)>> = vec![None; nv];
        for (fi, f) in mesh.faces().iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                owner[v].get_or_insert((fi, k));
            }
        }
        for (v, o) in owner.iter().enumerate() {
            if let Some((fi, k)) = *o {
                let mut bary = Vec3::zeros();
                bary[k] = 1.0;
                out.push(SurfaceSample {
                    position: mesh.vertices()[v],
                    face_index: fi,
                    barycentric: bary,
                });
            }
        }
    }
    let remaining = count - out.len();
    if remaining == 0 {
        return Ok(out);
    }

    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..remaining {
        let u = (j as f64 + rng.random::<f64>()) / remaining as f64 * total;
        let face = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let bary = Vec3::new(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        let [a, b, c] = mesh.triangle(face);
        out.push(SurfaceSample {
            position: a * bary.x + b * bary.y + c * bary.z,
            face_index: face,
            barycentric: bary,
        });
    }
    Ok(out)
}

/// Source points for a part's distance field: its vertices for small meshes,
/// otherwise a fixed-seed area sample of [`VDF_MAX_SAMPLES`] points.
pub fn vdf_source_samples(mesh: &TriMesh) -> Vec<SurfaceSample> {
    let count = if mesh.vertices().len() <= VDF_MAX_SAMPLES {
        mesh.vertices().len()
    } else {
        VDF_MAX_SAMPLES
    };
    sample_surface(mesh, count, FIXED_SAMPLE_SEED).expect("count is positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn vertex_mode_returns_vertices() {
        let m = primitives::cuboid(Vec3::zeros(), Vec3::repeat(1.0), 2);
        let s = sample_surface(&m, m.vertices().len(), 3).unwrap();
        let got: Vec<Vec3> = s.iter().map(|x| x.position).collect();
        assert_eq!(got, m.vertices());
    }

    #[test]
    fn positions_match_barycentric() {
        let m = primitives::icosphere(Vec3::zeros(), 1.0, 1);
        for s in sample_surface(&m, 500, 9).unwrap() {
            assert!((s.on(&m) - s.position).norm() < 1e-12);
            assert!((s.barycentric.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let m = primitives::unit_cube();
        assert_eq!(
            sample_surface(&m, 100, 42).unwrap(),
            sample_surface(&m, 100, 42).unwrap()
        );
        assert_ne!(
            sample_surface(&m, 100, 42).unwrap(),
            sample_surface(&m, 100, 43).unwrap()
        );
    }

    #[test]
    fn zero_count_rejected() {
        assert!(sample_surface(&primitives::unit_cube(), 0, 1).is_err());
    }
}
