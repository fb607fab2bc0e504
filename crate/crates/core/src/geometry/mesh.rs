use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::liegroup::{RigidTransform, Vec3};

/// Minimum face area, relative to the squared bounding-box diagonal.
pub const MIN_RELATIVE_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::repeat(margin),
            max: self.max + Vec3::repeat(margin),
        }
    }

    /// Entry parameter of the ray `origin + t dir` (t >= 0), if it hits.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let a = (self.min[i] - origin[i]) * inv_dir[i];
            let b = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // NaN from 0 * inf means the ray runs inside the slab plane.
            if !lo.is_nan() {
                t0 = t0.max(lo);
            }
            if !hi.is_nan() {
                t1 = t1.min(hi);
            }
        }
        (t0 <= t1).then_some(t0)
    }
}

/// Indexed triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates indices, vertex count and face areas.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&k| k >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {i} has index out of range (vertex count {n})"
                )));
            }
        }
        let diag = Aabb::from_points(&vertices).diagonal();
        if !(diag > 0.0) {
            return Err(Error::InvalidMesh("all vertices coincide".into()));
        }
        let mesh = Self { vertices, faces };
        let scale = diag * diag;
        for i in 0..mesh.faces.len() {
            if mesh.face_area(i) / scale <= MIN_RELATIVE_AREA {
                return Err(Error::InvalidMesh(format!("face {i} is degenerate")));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_cross(face).normalize()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.aabb().diagonal()
    }

    /// Rigidly moved copy; validity is preserved.
    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Area-weighted centroid of the surface.
    pub fn area_centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut area = 0.0;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.triangle(f);
            let w = self.face_area(f);
            acc += w * (a + b + c) / 3.0;
            area += w;
        }
        acc / area
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    /// Volume-weighted centroid for closed meshes; `None` if the enclosed
    /// volume vanishes.
    pub fn volume_centroid(&self) -> Option<(f64, Vec3)> {
        let mut vol = 0.0;
        let mut acc = Vec3::zeros();
        for &[a, b, c] in &self.faces {
            let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let v = p.dot(&q.cross(&r)) / 6.0;
            vol += v;
            acc += v * (p + q + r) / 4.0;
        }
        let scale = self.bbox_diagonal().powi(3);
        (vol.abs() > 1e-12 * scale).then(|| (vol, acc / vol))
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    /// Disjoint union of several meshes.
    pub fn merged<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        }
        TriMesh::new(vertices, faces)
    }
}

/// Axis-aligned bounds of a mesh.
pub fn aabb(mesh: &TriMesh) -> (Vec3, Vec3) {
    let b = mesh.aabb();
    (b.min, b.max)
}

pub fn bbox_diagonal(mesh: &TriMesh) -> f64 {
    mesh.bbox_diagonal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn unit_cube_bounds() {
        let cube = primitives::unit_cube();
        let (lo, hi) = aabb(&cube);
        assert_eq!(lo, Vec3::zeros());
        assert_eq!(hi, Vec3::repeat(1.0));
        assert!((bbox_diagonal(&cube) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bounds_follow_translation() {
        let cube = primitives::unit_cube();
        let t = Vec3::new(0.5, -2.0, 3.0);
        let (lo, hi) = aabb(&cube.transformed(&RigidTransform::from_translation(t)));
        assert!((lo - t).norm() < 1e-15);
        assert!((hi - t - Vec3::repeat(1.0)).norm() < 1e-15);
    }

    #[test]
    fn union_of_boxes_matches_vertex_scan() {
        let a = primitives::cuboid(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 2.0), 1);
        let b = primitives::cuboid(Vec3::new(0.5, -0.3, 0.1), Vec3::new(2.0, 0.2, 0.4), 2);
        let m = TriMesh::merged([&a, &b]).unwrap();
        let mut lo = Vec3::repeat(f64::MAX);
        let mut hi = Vec3::repeat(f64::MIN);
        for v in a.vertices().iter().chain(b.vertices()) {
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        assert_eq!(aabb(&m), (lo, hi));
    }

    #[test]
    fn rejects_bad_meshes() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(v.clone(), vec![]).is_err());
        assert!(TriMesh::new(v[..2].to_vec(), vec![[0, 1, 1]]).is_err());
        let flat = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(
            TriMesh::new(flat, vec![[0, 1, 2]]),
            Err(Error::InvalidMesh(_))
        ));
        assert!(TriMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn closed_cube_volume() {
        let cube = primitives::unit_cube();
        assert!(cube.is_closed());
        let (vol, c) = cube.volume_centroid().unwrap();
        assert!((vol - 1.0).abs() < 1e-12);
        assert!((c - Vec3::repeat(0.5)).norm() < 1e-12);
    }
}
