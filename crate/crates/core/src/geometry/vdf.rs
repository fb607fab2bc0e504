use super::bvh::Bvh;
use super::sampling::SurfaceSample;
use crate::error::{Error, Result};
use crate::liegroup::Vec3;

/// Vectors from posed part samples to their closest points on a parent, with
/// the parent normals at those points.
#[derive(Clone, Debug, PartialEq)]
pub struct VdfSnapshot {
    pub samples: Vec<SurfaceSample>,
    pub offsets: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl VdfSnapshot {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Offsets `proj(x) - x` for each sample position against `parent`.
pub fn compute_vdf(part_samples: &[SurfaceSample], parent: &Bvh) -> Result<VdfSnapshot> {
    if part_samples.is_empty() {
        return Err(Error::EmptyInput("vdf samples"));
    }
    let mut offsets = Vec::with_capacity(part_samples.len());
    let mut normals = Vec::with_capacity(part_samples.len());
    for s in part_samples {
        let p = parent.closest_point(&s.position);
        offsets.push(p.point - s.position);
        normals.push(p.normal);
    }
    Ok(VdfSnapshot {
        samples: part_samples.to_vec(),
        offsets,
        normals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, sample_surface};

    #[test]
    fn planar_parent_offsets_point_down() {
        let ground = Bvh::new(primitives::grid_plane((-5.0, -5.0), (5.0, 5.0), 0.0, 4));
        let samples: Vec<SurfaceSample> = (0..20)
            .map(|i| SurfaceSample {
                position: Vec3::new(-2.0 + 0.2 * i as f64, 0.1 * i as f64, 1.0),
                face_index: 0,
                barycentric: Vec3::new(1.0, 0.0, 0.0),
            })
            .collect();
        let vdf = compute_vdf(&samples, &ground).unwrap();
        for (o, n) in vdf.offsets.iter().zip(&vdf.normals) {
            assert!((o - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn samples_on_parent_have_zero_offset() {
        let cube = primitives::unit_cube();
        let bvh = Bvh::new(cube.clone());
        let s = sample_surface(&cube, 50, 1).unwrap();
        let vdf = compute_vdf(&s, &bvh).unwrap();
        assert!(vdf.offsets.iter().all(|o| o.norm() < 1e-12));
    }

    #[test]
    fn empty_rejected() {
        let bvh = Bvh::new(primitives::unit_cube());
        assert!(compute_vdf(&[], &bvh).is_err());
    }
}
