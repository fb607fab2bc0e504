//! Closed, outward-oriented primitive meshes for scenes, tests and examples.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::mesh::TriMesh;
use crate::liegroup::Vec3;

/// Axis-aligned box with each face split into `subdivisions^2` quads.
pub fn cuboid(min: Vec3, max: Vec3, subdivisions: usize) -> TriMesh {
    let n = subdivisions.max(1);
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |g: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(g).or_insert_with(|| {
            let p = Vec3::from_fn(|i, _| min[i] + (max[i] - min[i]) * g[i] as f64 / n as f64);
            vertices.push(p);
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for i in 0..n {
                for j in 0..n {
                    let grid = |di: usize, dj: usize| {
                        let mut g = [0; 3];
                        g[axis] = side;
                        g[u] = i + di;
                        g[v] = j + dj;
                        g
                    };
                    let a = vid(grid(0, 0), &mut vertices);
                    let b = vid(grid(1, 0), &mut vertices);
                    let c = vid(grid(1, 1), &mut vertices);
                    let d = vid(grid(0, 1), &mut vertices);
                    if side == n {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("cuboid is valid")
}

pub fn unit_cube() -> TriMesh {
    cuboid(Vec3::zeros(), Vec3::repeat(1.0), 1)
}

/// Capped cylinder around the z axis between `z0` and `z1`.
pub fn cylinder(radius: f64, z0: f64, z1: f64, segments: usize, stacks: usize) -> TriMesh {
    let segments = segments.max(3);
    let stacks = stacks.max(1);
    let mut vertices = Vec::new();
    for s in 0..=stacks {
        let z = z0 + (z1 - z0) * s as f64 / stacks as f64;
        for k in 0..segments {
            let a = 2.0 * PI * k as f64 / segments as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let ring = |s: usize, k: usize| s * segments + k % segments;
    let mut faces = Vec::new();
    for s in 0..stacks {
        for k in 0..segments {
            let (a, b) = (ring(s, k), ring(s, k + 1));
            let (c, d) = (ring(s + 1, k + 1), ring(s + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let bottom = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, z0));
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, z1));
    for k in 0..segments {
        faces.push([bottom, ring(0, k + 1), ring(0, k)]);
        faces.push([top, ring(stacks, k), ring(stacks, k + 1)]);
    }
    TriMesh::new(vertices, faces).expect("cylinder is valid")
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| center + v * radius).collect();
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Icosphere stretched to semi-axes `radii`. `inward` flips the winding so
/// the normals face the center, which turns it into a cavity wall.
pub fn ellipsoid(center: Vec3, radii: Vec3, subdivisions: usize, inward: bool) -> TriMesh {
    let unit = icosphere(Vec3::zeros(), 1.0, subdivisions);
    let vertices = unit
        .vertices()
        .iter()
        .map(|v| center + v.component_mul(&radii))
        .collect();
    let faces = unit
        .faces()
        .iter()
        .map(|&[a, b, c]| if inward { [a, c, b] } else { [a, b, c] })
        .collect();
    TriMesh::new(vertices, faces).expect("ellipsoid is valid")
}

/// Closed surface of revolution about the z axis. `profile` lists
/// `(radius, z)` points from one pole to the other; both ends must lie on the
/// axis (radius 0). Faces are wound so the normals point out of the solid.
pub fn lathe(profile: &[(f64, f64)], segments: usize) -> TriMesh {
    assert!(profile.len() >= 3, "profile needs at least 3 points");
    let seg = segments.max(3);
    let ring_count = profile.len() - 2;
    let mut vertices = vec![Vec3::new(0.0, 0.0, profile[0].1)];
    for &(r, z) in &profile[1..profile.len() - 1] {
        for k in 0..seg {
            let a = std::f64::consts::TAU * k as f64 / seg as f64;
            vertices.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    let top = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].1));
    let ring = |i: usize, k: usize| 1 + i * seg + k % seg;
    let mut faces = Vec::new();
    for k in 0..seg {
        faces.push([0, ring(0, k + 1), ring(0, k)]);
        for i in 0..ring_count - 1 {
            let (a, b, c, d) = (ring(i, k), ring(i, k + 1), ring(i + 1, k + 1), ring(i + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
        faces.push([top, ring(ring_count - 1, k), ring(ring_count - 1, k + 1)]);
    }
    let mesh = TriMesh::new(vertices, faces).expect("lathe profile is valid");
    if mesh.signed_volume() < 0.0 {
        let flipped = mesh.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
        TriMesh::new(mesh.vertices().to_vec(), flipped).expect("lathe profile is valid")
    } else {
        mesh
    }
}

/// Open square grid in the plane `z = height`, normal +z.
pub fn grid_plane(min: (f64, f64), max: (f64, f64), height: f64, cells: usize) -> TriMesh {
    let n = cells.max(1);
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::new(
                min.0 + (max.0 - min.0) * i as f64 / n as f64,
                min.1 + (max.1 - min.1) * j as f64 / n as f64,
                height,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid plane is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed_and_outward() {
        for m in [
            cuboid(Vec3::new(-1.0, -2.0, 0.0), Vec3::new(1.0, 0.5, 0.3), 3),
            cylinder(0.3, -0.5, 0.5, 16, 3),
            icosphere(Vec3::new(1.0, 0.0, 0.0), 2.0, 2),
        ] {
            assert!(m.is_closed());
            assert!(m.signed_volume() > 0.0);
        }
        let c = cuboid(Vec3::zeros(), Vec3::new(2.0, 3.0, 4.0), 4);
        assert!((c.signed_volume() - 24.0).abs() < 1e-12);
        assert_eq!(c.vertices().len(), 6 * 16 + 2);
    }
}
