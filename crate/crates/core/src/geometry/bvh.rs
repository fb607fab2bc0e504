use super::mesh::{Aabb, TriMesh};
use crate::error::Result;
use crate::liegroup::{RigidTransform, Vec3};

const LEAF_SIZE: usize = 4;

/// Which closed sub-simplex of a triangle holds the closest point. Indices are
/// local corner indices (0, 1, 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Vertex(u8),
    Edge(u8, u8),
    Face,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec3,
    pub normal: Vec3,
    pub face_index: usize,
    pub feature: Feature,
    pub distance: f64,
}

/// Closest point on triangle `(a, b, c)` to `p`, with its barycentric
/// coordinates and the feature it lies on.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Vec3::new(1.0, 0.0, 0.0), Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Vec3::new(0.0, 1.0, 0.0), Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Vec3::new(1.0 - v, v, 0.0), Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Vec3::new(0.0, 0.0, 1.0), Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Vec3::new(1.0 - w, 0.0, w), Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Vec3::new(0.0, 1.0 - w, w), Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Vec3::new(1.0 - v - w, v, w), Feature::Face)
}

/// Moller-Trumbore ray/triangle intersection; returns the ray parameter.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(&e2);
    let det = e1.dot(&pv);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tv = origin - a;
    let u = tv.dot(&pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = tv.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qv) * inv)
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Bounding-volume hierarchy over the faces of a mesh, plus the per-vertex
/// and per-edge normals used to report projection normals.
#[derive(Clone, Debug)]
pub struct Bvh {
    mesh: TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    /// Normal of edge `(f[k], f[k+1])` stored at `[f][k]`.
    edge_normals: Vec<[Vec3; 3]>,
}

pub fn build_bvh(mesh: &TriMesh) -> Result<Bvh> {
    Ok(Bvh::new(mesh.clone()))
}

impl Bvh {
    pub fn new(mesh: TriMesh) -> Self {
        let nf = mesh.faces().len();
        let face_normals: Vec<Vec3> = (0..nf).map(|f| mesh.face_normal(f)).collect();
        let (vertex_normals, edge_normals) = feature_normals(&mesh, &face_normals);

        let centroids: Vec<Vec3> = (0..nf)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let boxes: Vec<Aabb> = (0..nf)
            .map(|f| Aabb::from_points(&mesh.triangle(f)))
            .collect();
        let mut order: Vec<usize> = (0..nf).collect();
        let mut nodes = Vec::with_capacity(2 * nf / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, nf, &centroids, &boxes);
        Self {
            mesh,
            nodes,
            order,
            face_normals,
            vertex_normals,
            edge_normals,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_normals[face]
    }

    pub fn vertex_normal(&self, vertex: usize) -> Vec3 {
        self.vertex_normals[vertex]
    }

    fn project_face(&self, q: &Vec3, face: usize) -> (Vec3, Feature, f64) {
        let [a, b, c] = self.mesh.triangle(face);
        let (p, _, feat) = closest_point_on_triangle(q, &a, &b, &c);
        (p, feat, (p - q).norm_squared())
    }

    fn feature_normal(&self, face: usize, feature: Feature) -> Vec3 {
        let f = self.mesh.faces()[face];
        match feature {
            Feature::Face => self.face_normals[face],
            Feature::Vertex(k) => self.vertex_normals[f[k as usize]],
            Feature::Edge(i, j) => {
                // local edges are (0,1), (1,2), (0,2); stored as (k, k+1 mod 3)
                let k = match (i, j) {
                    (0, 1) => 0,
                    (1, 2) => 1,
                    _ => 2,
                };
                self.edge_normals[face][k]
            }
        }
    }

    fn finish(&self, q: &Vec3, face: usize, point: Vec3, feature: Feature, d2: f64) -> Projection {
        let _ = q;
        Projection {
            point,
            normal: self.feature_normal(face, feature),
            face_index: face,
            feature,
            distance: d2.sqrt(),
        }
    }

    /// Globally nearest surface point. Equidistant faces resolve to the lowest
    /// face index.
    pub fn closest_point(&self, q: &Vec3) -> Projection {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros(), Feature::Face);
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_squared(q) > best.0 * (1.0 + 1e-12) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &face in &self.order[start..start + count] {
                        let (p, feat, d2) = self.project_face(q, face);
                        if d2 < best.0 || (d2 == best.0 && face < best.1) {
                            best = (d2, face, p, feat);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(q);
                    let dr = self.nodes[right].bounds.distance_squared(q);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        self.finish(q, best.1, best.2, best.3, best.0)
    }

    /// Linear scan over all faces with the same tie rule as [`Self::closest_point`].
    pub fn brute_force_closest_point(&self, q: &Vec3) -> Projection {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros(), Feature::Face);
        for face in 0..self.mesh.faces().len() {
            let (p, feat, d2) = self.project_face(q, face);
            if d2 < best.0 {
                best = (d2, face, p, feat);
            }
        }
        self.finish(q, best.1, best.2, best.3, best.0)
    }

    pub fn distance(&self, q: &Vec3) -> f64 {
        self.closest_point(q).distance
    }

    /// Visits every face whose box the ray enters, passing the hit parameter.
    fn for_each_ray_hit(&self, origin: &Vec3, dir: &Vec3, mut visit: impl FnMut(usize, f64)) {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &face in &self.order[start..start + count] {
                        let [a, b, c] = self.mesh.triangle(face);
                        if let Some(t) = ray_triangle(origin, dir, &a, &b, &c) {
                            visit(face, t);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
    }

    /// Sorted ray parameters `t > 0` of all surface crossings.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3) -> Vec<f64> {
        let mut hits = Vec::new();
        self.for_each_ray_hit(origin, dir, |_, t| {
            if t > 0.0 {
                hits.push(t);
            }
        });
        hits.sort_by(f64::total_cmp);
        hits
    }

    /// Parity inside test along three fixed skew directions, majority vote.
    pub fn contains(&self, p: &Vec3) -> bool {
        const DIRS: [[f64; 3]; 3] = [
            [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
            [-0.2672612419124244, 0.8017837257372732, -0.5345224838248488],
            [0.8164965809277261, -0.4082482904638631, -0.4082482904638631],
        ];
        if self.bounds().distance_squared(p) > 0.0 {
            return false;
        }
        let votes = DIRS
            .iter()
            .filter(|d| {
                let d = Vec3::new(d[0], d[1], d[2]);
                let mut n = 0usize;
                self.for_each_ray_hit(p, &d, |_, t| {
                    if t > 0.0 {
                        n += 1;
                    }
                });
                n % 2 == 1
            })
            .count();
        votes >= 2
    }

    /// True if any triangle of `self` crosses any triangle of `other`, where
    /// `other_pose` maps `other`'s coordinates into `self`'s.
    pub fn intersects(&self, other: &Bvh, other_pose: &RigidTransform) -> bool {
        let other_tri = |f: usize| -> [Vec3; 3] {
            let [a, b, c] = other.mesh.triangle(f);
            [
                other_pose.apply_point(&a),
                other_pose.apply_point(&b),
                other_pose.apply_point(&c),
            ]
        };
        let moved_box = |b: &Aabb| -> Aabb {
            let mut out = Aabb::empty();
            for k in 0..8 {
                let c = Vec3::new(
                    if k & 1 == 0 { b.min.x } else { b.max.x },
                    if k & 2 == 0 { b.min.y } else { b.max.y },
                    if k & 4 == 0 { b.min.z } else { b.max.z },
                );
                out.grow(&other_pose.apply_point(&c));
            }
            out
        };
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, j)) = stack.pop() {
            let (na, nb) = (&self.nodes[i], &other.nodes[j]);
            if !na.bounds.intersects(&moved_box(&nb.bounds)) {
                continue;
            }
            match (&na.kind, &nb.kind) {
                (NodeKind::Leaf { start: sa, count: ca }, NodeKind::Leaf { start: sb, count: cb }) => {
                    for &fa in &self.order[*sa..sa + ca] {
                        let ta = self.mesh.triangle(fa);
                        for &fb in &other.order[*sb..sb + cb] {
                            if triangles_intersect(&ta, &other_tri(fb)) {
                                return true;
                            }
                        }
                    }
                }
                (NodeKind::Inner { left, right }, NodeKind::Leaf { .. }) => {
                    stack.push((*left, j));
                    stack.push((*right, j));
                }
                (NodeKind::Leaf { .. }, NodeKind::Inner { left, right }) => {
                    stack.push((i, *left));
                    stack.push((i, *right));
                }
                (NodeKind::Inner { left, right }, NodeKind::Inner { left: l2, right: r2 }) => {
                    if na.bounds.volume() >= nb.bounds.volume() {
                        stack.push((*left, j));
                        stack.push((*right, j));
                    } else {
                        stack.push((i, *l2));
                        stack.push((i, *r2));
                    }
                }
            }
        }
        false
    }
}

fn segment_crosses_triangle(p: &Vec3, q: &Vec3, tri: &[Vec3; 3]) -> bool {
    let dir = q - p;
    match ray_triangle(p, &dir, &tri[0], &tri[1], &tri[2]) {
        Some(t) => (0.0..=1.0).contains(&t),
        None => false,
    }
}

/// Transversal triangle/triangle intersection: some edge of one triangle
/// pierces the other. Coplanar contact is not reported.
pub fn triangles_intersect(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    let ba = Aabb::from_points(a);
    let bb = Aabb::from_points(b);
    if !ba.intersects(&bb) {
        return false;
    }
    (0..3).any(|k| segment_crosses_triangle(&a[k], &a[(k + 1) % 3], b))
        || (0..3).any(|k| segment_crosses_triangle(&b[k], &b[(k + 1) % 3], a))
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    centroids: &[Vec3],
    boxes: &[Aabb],
) -> usize {
    let slice = &mut order[start..end];
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in slice.iter() {
        bounds = bounds.union(&boxes[f]);
        cbounds.grow(&centroids[f]);
    }
    let id = nodes.len();
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf {
                start,
                count: end - start,
            },
        });
        return id;
    }
    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    slice.sort_by(|&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let mid = start + slice.len() / 2;
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf { start: 0, count: 0 },
    });
    let left = build_node(nodes, order, start, mid, centroids, boxes);
    let right = build_node(nodes, order, mid, end, centroids, boxes);
    nodes[id].kind = NodeKind::Inner { left, right };
    id
}

/// Angle-weighted vertex normals and averaged edge normals.
fn feature_normals(mesh: &TriMesh, face_normals: &[Vec3]) -> (Vec<Vec3>, Vec<[Vec3; 3]>) {
    use std::collections::HashMap;
    let nv = mesh.vertices().len();
    let mut vn = vec![Vec3::zeros(); nv];
    let mut edge_sum: HashMap<(usize, usize), Vec3> = HashMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = face_normals[fi];
        for k in 0..3 {
            let (i, j, l) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let p = mesh.vertices()[i];
            let e1 = (mesh.vertices()[j] - p).normalize();
            let e2 = (mesh.vertices()[l] - p).normalize();
            let angle = e1.dot(&e2).clamp(-1.0, 1.0).acos();
            vn[i] += n * angle;
            *edge_sum.entry((i.min(j), i.max(j))).or_insert_with(Vec3::zeros) += n;
        }
    }
    let unit_or = |v: Vec3, fallback: Vec3| {
        let len = v.norm();
        if len > 1e-12 {
            v / len
        } else {
            fallback
        }
    };
    let mut vertex_fallback = vec![None; nv];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for &v in f {
            vertex_fallback[v].get_or_insert(face_normals[fi]);
        }
    }
    let vertex_normals = vn
        .into_iter()
        .enumerate()
        .map(|(i, v)| unit_or(v, vertex_fallback[i].unwrap_or_else(Vec3::z)))
        .collect();
    let edge_normals = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let e = |k: usize| {
                let (i, j) = (f[k], f[(k + 1) % 3]);
                unit_or(edge_sum[&(i.min(j), i.max(j))], face_normals[fi])
            };
            [e(0), e(1), e(2)]
        })
        .collect();
    (vertex_normals, edge_normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn single_triangle_has_one_leaf() {
        let m = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let bvh = build_bvh(&m).unwrap();
        assert_eq!(bvh.leaf_count(), 1);
    }

    #[test]
    fn unit_cube_face_projection() {
        let bvh = Bvh::new(primitives::unit_cube());
        let p = bvh.closest_point(&Vec3::new(2.0, 0.5, 0.5));
        assert!((p.point - Vec3::new(1.0, 0.5, 0.5)).norm() < 1e-12);
        assert!((p.normal - Vec3::x()).norm() < 1e-12);
        assert!((p.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_on_surface_projects_to_itself() {
        let bvh = Bvh::new(primitives::unit_cube());
        let q = Vec3::new(0.3, 0.7, 1.0);
        let p = bvh.closest_point(&q);
        assert_eq!(p.distance, 0.0);
        assert!((p.point - q).norm() < 1e-15);
    }

    #[test]
    fn sphere_radial_projection() {
        let bvh = Bvh::new(primitives::icosphere(Vec3::zeros(), 1.0, 3));
        let p = bvh.closest_point(&Vec3::new(2.0, 0.0, 0.0));
        assert!((p.point - Vec3::x()).norm() < 2e-2);
        assert!((p.normal - Vec3::x()).norm() < 5e-2);
    }

    #[test]
    fn corner_uses_vertex_normal() {
        let bvh = Bvh::new(primitives::unit_cube());
        let p = bvh.closest_point(&Vec3::new(2.0, 2.0, 2.0));
        assert!(matches!(p.feature, Feature::Vertex(_)));
        assert!((p.normal - Vec3::repeat(1.0).normalize()).norm() < 1e-12);
    }

    #[test]
    fn contains_and_rays() {
        let bvh = Bvh::new(primitives::cuboid(Vec3::zeros(), Vec3::repeat(1.0), 3));
        assert!(bvh.contains(&Vec3::new(0.5, 0.4, 0.3)));
        assert!(!bvh.contains(&Vec3::new(1.5, 0.4, 0.3)));
        let hits = bvh.ray_hits(&Vec3::new(0.31, 0.47, -1.0), &Vec3::z());
        assert_eq!(hits.len(), 2);
        assert!((hits[0] - 1.0).abs() < 1e-12 && (hits[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cube_pair_intersection() {
        let a = Bvh::new(primitives::unit_cube());
        let b = Bvh::new(primitives::unit_cube());
        let apart = RigidTransform::from_translation(Vec3::new(1.5, 0.0, 0.0));
        let overlap = RigidTransform::from_translation(Vec3::new(0.7, 0.1, 0.2));
        assert!(!a.intersects(&b, &apart));
        assert!(a.intersects(&b, &overlap));
    }
}
