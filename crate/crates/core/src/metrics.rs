//! Assembly quality metrics: connectivity (rooted), quasi-static stability,
//! sibling volume overlap (AOR) and coverage / minimum matching distance
//! against a reference set.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionality::AssembledScene;
use crate::geometry::{
    point_cloud_chamfer, sample_surface, surface_gap, Aabb, Placed, TriMesh, FIXED_SAMPLE_SEED,
};
use crate::kinematics::PoseVector;
use crate::liegroup::{RigidTransform, Vec3};

/// Contact tolerance for `rooted`, as a fraction of the scene diagonal.
pub const ROOTED_TOLERANCE: f64 = 0.01;
/// Ground band for `stable`, as a fraction of the scene diagonal.
pub const GROUND_BAND: f64 = 0.01;
/// Relative shrink of the support polygon in `stable`.
pub const SUPPORT_MARGIN: f64 = 0.02;
pub const DEFAULT_VOXEL_RES: usize = 64;
/// Surface samples per part used for support polygons.
const SUPPORT_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Contact tolerance for `rooted`; defaults to 1% of the scene diagonal.
    pub rooted_tol: Option<f64>,
    pub gravity: Vec3,
    pub voxel_res: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            rooted_tol: None,
            gravity: -Vec3::z(),
            voxel_res: DEFAULT_VOXEL_RES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: String,
    pub b: String,
    pub intersection_volume: f64,
    /// `|A and B| / min(|A|, |B|)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AorReport {
    pub aor: f64,
    pub pairs: Vec<PairOverlap>,
    /// Parts voxelized as surface shells because they are not closed.
    pub open_parts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rooted: bool,
    pub stable: bool,
    pub aor: f64,
    pub pairs: Vec<PairOverlap>,
    pub warnings: Vec<String>,
}

struct Posed<'a> {
    id: &'a str,
    placed: Placed<'a>,
    mesh: TriMesh,
}

fn rest_parts(scene: &AssembledScene) -> Result<Vec<Posed<'_>>> {
    let rest = PoseVector::rest(&scene.tree);
    scene
        .world_transforms(&rest)?
        .into_iter()
        .map(|(id, t)| {
            let (id, part) = scene.tree.parts.get_key_value(&id).expect("world covers tree");
            Ok(Posed {
                id,
                placed: Placed::new(&scene.geometry(id)?.bvh, t),
                mesh: part.mesh.transformed(&t),
            })
        })
        .collect()
}

fn bounds_of<'a>(meshes: impl Iterator<Item = &'a TriMesh>) -> Aabb {
    meshes.fold(Aabb::empty(), |acc, m| acc.union(&m.aabb()))
}

/// Whether the parts at rest form one connected component, joining two parts
/// when their surfaces come within `tol` (default 1% of the scene diagonal)
/// or one contains the other.
pub fn rooted(scene: &AssembledScene, tol: Option<f64>) -> Result<bool> {
    let parts = rest_parts(scene)?;
    let tol = tol.unwrap_or_else(|| ROOTED_TOLERANCE * bounds_of(parts.iter().map(|p| &p.mesh)).diagonal());
    let n = parts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&parts[i], &parts[j]);
            if !a.mesh.aabb().expanded(tol).intersects(&b.mesh.aabb()) {
                continue;
            }
            let touching = surface_gap(&a.placed, &b.placed, 0) < tol
                || b.placed.contains(&a.mesh.vertices()[0])
                || a.placed.contains(&b.mesh.vertices()[0]);
            if touching {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let root = find(&mut parent, 0);
    Ok((0..n).all(|i| find(&mut parent, i) == root))
}

/// Quasi-static stability: the volume-weighted centre of mass, projected
/// along `gravity`, must lie inside the convex hull of the ground-contact
/// points shrunk by 2%.
pub fn stable(scene: &AssembledScene, gravity: &Vec3) -> Result<bool> {
    if !(gravity.norm() > 0.0) {
        return Err(Error::InvalidConfig("gravity direction must be nonzero".into()));
    }
    let g = gravity.normalize();
    let parts = rest_parts(scene)?;
    let diag = bounds_of(parts.iter().map(|p| &p.mesh)).diagonal();

    let mut mass = 0.0;
    let mut moment = Vec3::zeros();
    for p in &parts {
        match p.mesh.volume_centroid() {
            Some((v, c)) if v > 0.0 => {
                mass += v;
                moment += v * c;
            }
            // Open or degenerate meshes count by area as thin shells.
            _ => {
                let a = p.mesh.total_area();
                mass += a;
                moment += a * p.mesh.area_centroid();
            }
        }
    }
    if !(mass > 0.0) {
        return Err(Error::NoGroundContact);
    }
    let com = moment / mass;

    // Height along gravity: larger is lower.
    let mut points: Vec<Vec3> = Vec::new();
    for p in &parts {
        points.extend_from_slice(p.mesh.vertices());
        points.extend(
            sample_surface(&p.mesh, SUPPORT_SAMPLES, FIXED_SAMPLE_SEED)?
                .into_iter()
                .map(|s| s.position),
        );
    }
    let lowest = points.iter().map(|p| p.dot(&g)).fold(f64::NEG_INFINITY, f64::max);
    let band = GROUND_BAND * diag;
    let contact: Vec<Vec3> = points.into_iter().filter(|p| p.dot(&g) >= lowest - band).collect();
    if contact.is_empty() {
        return Err(Error::NoGroundContact);
    }
    let u = g.cross(&if g.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
    let v = g.cross(&u);
    let flat = |p: &Vec3| [p.dot(&u), p.dot(&v)];
    let hull = convex_hull(contact.iter().map(flat).collect());
    if hull.len() < 3 {
        return Ok(false);
    }
    let centre = hull.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let centre = [centre[0] / hull.len() as f64, centre[1] / hull.len() as f64];
    let shrunk: Vec<[f64; 2]> = hull
        .iter()
        .map(|p| {
            let s = 1.0 - SUPPORT_MARGIN;
            [centre[0] + s * (p[0] - centre[0]), centre[1] + s * (p[1] - centre[1])]
        })
        .collect();
    Ok(inside_convex(&shrunk, flat(&com)))
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull by the monotone chain, collinear points dropped.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_convex(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    (0..hull.len()).all(|i| cross2(hull[i], hull[(i + 1) % hull.len()], p) >= 0.0)
}

/// Shared voxel grid over a box, `res` cells per axis.
struct Grid {
    lo: Vec3,
    cell: Vec3,
    res: usize,
}

impl Grid {
    fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.lo + Vec3::new(
            (i as f64 + 0.5) * self.cell.x,
            (j as f64 + 0.5) * self.cell.y,
            (k as f64 + 0.5) * self.cell.z,
        )
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.res + j) * self.res + i
    }

    fn voxel_volume(&self) -> f64 {
        self.cell.x * self.cell.y * self.cell.z
    }
}

/// Solid occupancy by scanline parity along x, or a dilated surface shell
/// when the mesh is open or some column sees an odd number of crossings.
/// Returns the occupancy and whether the shell fallback was used.
fn voxelize(mesh: &TriMesh, grid: &Grid) -> (Vec<bool>, bool) {
    let n = grid.res;
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    // Column positions are nudged off the cell centres so that they do not
    // run exactly through the edges of axis-aligned meshes.
    let nudge = Vec3::new(0.0, 1.234567e-7, 2.345678e-7);
    for f in 0..mesh.faces().len() {
        let [a, b, c] = mesh.triangle(f);
        let (ylo, yhi) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
        let (zlo, zhi) = (a.z.min(b.z).min(c.z), a.z.max(b.z).max(c.z));
        let j0 = (((ylo - grid.lo.y) / grid.cell.y - 0.5).ceil().max(0.0)) as usize;
        let k0 = (((zlo - grid.lo.z) / grid.cell.z - 0.5).ceil().max(0.0)) as usize;
        let j1 = (((yhi - grid.lo.y) / grid.cell.y - 0.5).floor()).min(n as f64 - 1.0);
        let k1 = (((zhi - grid.lo.z) / grid.cell.z - 0.5).floor()).min(n as f64 - 1.0);
        if j1 < 0.0 || k1 < 0.0 {
            continue;
        }
        for k in k0..=(k1 as usize) {
            for j in j0..=(j1 as usize) {
                let p = grid.center(0, j, k) + nudge.component_mul(&grid.cell);
                if let Some(x) = column_hit(&a, &b, &c, p.y, p.z) {
                    hits[k * n + j].push(x);
                }
            }
        }
    }
    let mut occ = vec![false; n * n * n];
    let open = !mesh.is_closed() || hits.iter().any(|h| h.len() % 2 == 1);
    if open {
        let samples = sample_surface(mesh, 64 * n * n, FIXED_SAMPLE_SEED).unwrap_or_default();
        for s in samples {
            let rel = (s.position - grid.lo).component_div(&grid.cell);
            let cell = |x: f64| (x.floor().max(0.0) as usize).min(n - 1);
            let (i, j, k) = (cell(rel.x), cell(rel.y), cell(rel.z));
            for dk in k.saturating_sub(1)..=(k + 1).min(n - 1) {
                for dj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                    for di in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                        occ[grid.index(di, dj, dk)] = true;
                    }
                }
            }
        }
        return (occ, true);
    }
    for k in 0..n {
        for j in 0..n {
            let h = &mut hits[k * n + j];
            h.sort_by(f64::total_cmp);
            for pair in h.chunks_exact(2) {
                for i in 0..n {
                    let x = grid.center(i, j, k).x;
                    if x >= pair[0] && x < pair[1] {
                        occ[grid.index(i, j, k)] = true;
                    }
                }
            }
        }
    }
    (occ, false)
}

/// x coordinate where the line `{(t, y, z)}` crosses triangle `abc`.
fn column_hit(a: &Vec3, b: &Vec3, c: &Vec3, y: f64, z: f64) -> Option<f64> {
    let d = (b.y - a.y) * (c.z - a.z) - (c.y - a.y) * (b.z - a.z);
    if d.abs() < 1e-300 {
        return None;
    }
    let u = ((y - a.y) * (c.z - a.z) - (c.y - a.y) * (z - a.z)) / d;
    let v = ((b.y - a.y) * (z - a.z) - (y - a.y) * (b.z - a.z)) / d;
    if u < 0.0 || v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(a.x + u * (b.x - a.x) + v * (c.x - a.x))
}

/// Mean sibling overlap ratio at rest on a `voxel_res`^3 grid over the scene
/// bounds; 0 when no part shares its parent with another.
pub fn aor(scene: &AssembledScene, voxel_res: usize) -> Result<AorReport> {
    if voxel_res < 16 {
        return Err(Error::InvalidConfig(format!("voxel_res must be at least 16, got {voxel_res}")));
    }
    let parts = rest_parts(scene)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in parts.iter().enumerate() {
        if let Some(parent) = scene.tree.parts[p.id].parent_id.as_deref() {
            groups.entry(parent).or_default().push(i);
        }
    }
    let pairs: Vec<(usize, usize)> = groups
        .values()
        .flat_map(|g| {
            g.iter()
                .enumerate()
                .flat_map(move |(x, &i)| g[x + 1..].iter().map(move |&j| (i, j)))
        })
        .collect();
    if pairs.is_empty() {
        return Ok(AorReport::default());
    }
    let bounds = bounds_of(parts.iter().map(|p| &p.mesh));
    let pad = 1e-6 * bounds.diagonal();
    let lo = bounds.min - Vec3::repeat(pad);
    let span = bounds.max + Vec3::repeat(pad) - lo;
    let grid = Grid {
        lo,
        cell: span / voxel_res as f64,
        res: voxel_res,
    };
    let mut needed: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    needed.sort_unstable();
    needed.dedup();
    let voxels: BTreeMap<usize, (Vec<bool>, bool)> = needed
        .par_iter()
        .map(|&i| (i, voxelize(&parts[i].mesh, &grid)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let vol = grid.voxel_volume();
    let count = |occ: &[bool]| occ.iter().filter(|&&x| x).count();
    let mut report = AorReport::default();
    for &(i, j) in &pairs {
        let (a, b) = (&voxels[&i].0, &voxels[&j].0);
        let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
        let smaller = count(a).min(count(b));
        report.pairs.push(PairOverlap {
            a: parts[i].id.to_owned(),
            b: parts[j].id.to_owned(),
            intersection_volume: both as f64 * vol,
            ratio: if smaller == 0 { 0.0 } else { both as f64 / smaller as f64 },
        });
    }
    report.aor = report.pairs.iter().map(|p| p.ratio).sum::<f64>() / report.pairs.len() as f64;
    report.open_parts = needed
        .iter()
        .filter(|i| voxels[i].1)
        .map(|&i| parts[i].id.to_owned())
        .collect();
    Ok(report)
}

/// Point clouds of equal size, one per shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSet {
    clouds: Vec<Vec<Vec3>>,
}

impl ReferenceSet {
    pub fn new(clouds: Vec<Vec<Vec3>>) -> Result<Self> {
        let Some(first) = clouds.first() else {
            return Err(Error::EmptyInput("reference set needs at least one shape"));
        };
        let n = first.len();
        if n == 0 || clouds.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidConfig(
                "reference clouds must be nonempty and of equal size".into(),
            ));
        }
        Ok(Self { clouds })
    }

    /// Fixed-seed surface samples of every mesh.
    pub fn from_meshes<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>, samples: usize) -> Result<Self> {
        let clouds = meshes
            .into_iter()
            .map(|m| {
                Ok(sample_surface(m, samples, FIXED_SAMPLE_SEED)?
                    .into_iter()
                    .map(|s| s.position)
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(clouds)
    }

    pub fn clouds(&self) -> &[Vec<Vec3>] {
        &self.clouds
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }
}

/// Coverage and minimum matching distance from the chamfer matrix
/// `d[g][r]`: COV is the fraction of references that are the nearest
/// reference of some generated shape (ties go to the lower index), MMD the
/// mean over references of the distance to their closest generated shape.
pub fn cov_mmd_from_matrix(d: &[Vec<f64>]) -> Result<(f64, f64)> {
    let refs = d.first().map_or(0, Vec::len);
    if d.is_empty() || refs == 0 {
        return Err(Error::EmptyInput("coverage needs generated and reference shapes"));
    }
    let mut covered = vec![false; refs];
    for row in d {
        let nearest = (0..refs)
            .min_by(|&a, &b| row[a].total_cmp(&row[b]))
            .expect("nonempty row");
        covered[nearest] = true;
    }
    let cov = covered.iter().filter(|&&c| c).count() as f64 / refs as f64;
    let mmd = (0..refs)
        .map(|r| d.iter().map(|row| row[r]).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / refs as f64;
    Ok((cov, mmd))
}

pub fn cov_mmd(generated: &ReferenceSet, reference: &ReferenceSet) -> Result<(f64, f64)> {
    let d: Vec<Vec<f64>> = generated
        .clouds
        .par_iter()
        .map(|g| reference.clouds.iter().map(|r| point_cloud_chamfer(g, r)).collect())
        .collect();
    cov_mmd_from_matrix(&d)
}

/// Rooted, stable and AOR in one report.
pub fn compute_metrics(scene: &AssembledScene, config: &MetricsConfig) -> Result<MetricsReport> {
    let a = aor(scene, config.voxel_res)?;
    let warnings = a
        .open_parts
        .iter()
        .map(|id| format!("part `{id}` is not closed; voxelized as a surface shell"))
        .collect();
    Ok(MetricsReport {
        rooted: rooted(scene, config.rooted_tol)?,
        stable: stable(scene, &config.gravity)?,
        aor: a.aor,
        pairs: a.pairs,
        warnings,
    })
}

/// Moves the whole scene by `motion`: the root's placement is pre-composed.
pub fn moved_scene(scene: &AssembledScene, motion: &RigidTransform) -> Result<AssembledScene> {
    let mut placements = scene.placements.clone();
    let root = scene.tree.root_id.clone();
    let current = placements.get(&root).copied().unwrap_or_default();
    placements.insert(root, *motion * current);
    scene.with_placements(placements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;
    use crate::kinematics::{KinematicPart, KinematicTree, PlacementSet};
    use crate::liegroup::Rotation;
    use std::sync::Arc;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn unit_at(x: f64, y: f64, z: f64) -> TriMesh {
        cuboid(v(x, y, z), v(x + 1.0, y + 1.0, z + 1.0), 1)
    }

    /// Root mesh plus children hanging off it, all placed at identity.
    fn scene_of(root: TriMesh, children: Vec<TriMesh>) -> AssembledScene {
        let mut parts = vec![KinematicPart::root("root", root)];
        for (i, m) in children.into_iter().enumerate() {
            parts.push(KinematicPart::child(format!("c{i}"), m, "root", None));
        }
        let tree = KinematicTree::new(parts).unwrap();
        let placements: PlacementSet = tree
            .non_root_ids()
            .into_iter()
            .map(|id| (id.to_owned(), RigidTransform::identity()))
            .collect();
        AssembledScene::new(Arc::new(tree), placements, vec![]).unwrap()
    }

    #[test]
    fn rooted_cases() {
        assert!(rooted(&scene_of(unit_at(0.0, 0.0, 0.0), vec![unit_at(1.0, 0.0, 0.0)]), None).unwrap());
        // 10% of the diagonal of the pair's bounds.
        let gap = 0.1 * (2.0f64 + 0.1).hypot(2f64.sqrt());
        let apart = scene_of(unit_at(0.0, 0.0, 0.0), vec![unit_at(1.0 + gap, 0.0, 0.0)]);
        assert!(!rooted(&apart, None).unwrap());
        let chain = scene_of(
            unit_at(0.0, 0.0, 0.0),
            vec![unit_at(1.0, 0.0, 0.0), unit_at(2.0, 0.0, 0.0)],
        );
        assert!(rooted(&chain, None).unwrap());
        let broken = scene_of(
            unit_at(0.0, 0.0, 0.0),
            vec![unit_at(1.0, 0.0, 0.0), unit_at(2.5, 0.0, 0.0)],
        );
        assert!(!rooted(&broken, None).unwrap());
    }

    #[test]
    fn stable_cases() {
        let g = -Vec3::z();
        let floor_cube = scene_of(unit_at(0.0, 0.0, 0.0), vec![]);
        assert!(stable(&floor_cube, &g).unwrap());
        // A 0.2-wide post with a long beam welded to its top.
        let post = cuboid(v(0.0, 0.0, 0.0), v(0.2, 0.2, 1.0), 1);
        let beam = cuboid(v(0.0, 0.0, 1.0), v(1.4, 0.2, 1.2), 1);
        let overhang = scene_of(post, vec![beam]);
        // Hand-computed: post volume 0.04 at x = 0.1, beam 0.056 at x = 0.7,
        // COM x = (0.004 + 0.0392) / 0.096 = 0.45 > 0.2.
        assert!(!stable(&overhang, &g).unwrap());
        let top = cuboid(v(0.0, 0.0, 1.0), v(1.0, 1.0, 1.1), 1);
        let leg = |x: f64, y: f64| cuboid(v(x, y, 0.0), v(x + 0.1, y + 0.1, 1.0), 1);
        let table = scene_of(top, vec![leg(0.0, 0.0), leg(0.9, 0.0), leg(0.0, 0.9), leg(0.9, 0.9)]);
        assert!(stable(&table, &g).unwrap());
    }

    #[test]
    fn stability_follows_gravity_with_the_scene() {
        let post = cuboid(v(0.0, 0.0, 0.0), v(0.2, 0.2, 1.0), 1);
        let beam = cuboid(v(0.0, 0.0, 1.0), v(1.4, 0.2, 1.2), 1);
        let table_top = cuboid(v(0.0, 0.0, 1.0), v(1.0, 1.0, 1.1), 1);
        let leg = |x: f64, y: f64| cuboid(v(x, y, 0.0), v(x + 0.1, y + 0.1, 1.0), 1);
        let motion = RigidTransform::new(Rotation::from_axis_angle(&v(1.0, 1.0, 0.0).normalize(), 0.8), v(2.0, 0.0, 1.0));
        let g = motion.apply_vector(&-Vec3::z());
        let overhang = moved_scene(&scene_of(post, vec![beam]), &motion).unwrap();
        assert!(!stable(&overhang, &g).unwrap());
        let table = moved_scene(
            &scene_of(table_top, vec![leg(0.0, 0.0), leg(0.9, 0.0), leg(0.0, 0.9), leg(0.9, 0.9)]),
            &motion,
        )
        .unwrap();
        assert!(stable(&table, &g).unwrap());
    }

    fn slab() -> TriMesh {
        cuboid(v(-0.5, -0.5, -0.1), v(2.5, 1.5, 0.0), 1)
    }

    #[test]
    fn aor_cases() {
        let disjoint = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0), unit_at(1.5, 0.0, 0.0)]);
        assert_eq!(aor(&disjoint, 64).unwrap().aor, 0.0);
        let same = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0), unit_at(0.0, 0.0, 0.0)]);
        assert!((aor(&same, 64).unwrap().aor - 1.0).abs() < 0.02);
        let half = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0), unit_at(0.5, 0.0, 0.0)]);
        let r = aor(&half, 64).unwrap();
        assert!((r.aor - 0.5).abs() < 0.025, "aor {}", r.aor);
        assert!((r.pairs[0].intersection_volume - 0.5).abs() < 0.05);
        let lonely = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0)]);
        assert_eq!(aor(&lonely, 64).unwrap(), AorReport::default());
        assert!(aor(&lonely, 8).is_err());
    }

    #[test]
    fn aor_grows_with_overlap() {
        let mut last = -1.0;
        for k in 0..=10 {
            let x = 1.2 - 1.2 * k as f64 / 10.0;
            let s = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0), unit_at(x, 0.0, 0.0)]);
            let a = aor(&s, 32).unwrap().aor;
            assert!((0.0..=1.0).contains(&a));
            assert!(a >= last, "{a} after {last}");
            last = a;
        }
    }

    #[test]
    fn aor_survives_a_rigid_motion() {
        let motion = RigidTransform::new(Rotation::from_axis_angle(&v(0.2, 1.0, 0.3).normalize(), 0.6), v(1.0, 2.0, 3.0));
        let s = scene_of(slab(), vec![unit_at(0.0, 0.0, 0.0), unit_at(0.5, 0.0, 0.0)]);
        let moved = moved_scene(&s, &motion).unwrap();
        assert!((aor(&moved, 64).unwrap().aor - 0.5).abs() < 0.05);
        assert!(rooted(&moved, None).unwrap());
    }

    #[test]
    fn open_meshes_fall_back_to_shells() {
        let plate = crate::geometry::primitives::grid_plane((0.0, 0.0), (1.0, 1.0), 0.5, 2);
        let s = scene_of(slab(), vec![plate.clone(), plate]);
        let r = aor(&s, 32).unwrap();
        assert_eq!(r.open_parts.len(), 2);
        assert!((r.aor - 1.0).abs() < 1e-12);
    }

    fn cloud(offset: f64) -> Vec<Vec3> {
        (0..5).map(|i| v(offset + i as f64 * 0.1, 0.0, 0.0)).collect()
    }

    #[test]
    fn cov_mmd_cases() {
        let x = ReferenceSet::new(vec![cloud(0.0), cloud(1.0), cloud(2.0)]).unwrap();
        assert_eq!(cov_mmd(&x, &x).unwrap(), (1.0, 0.0));
        let one = ReferenceSet::new(vec![cloud(1.1)]).unwrap();
        let (cov, _) = cov_mmd(&one, &x).unwrap();
        assert!((cov - 1.0 / 3.0).abs() < 1e-12);
        assert!(ReferenceSet::new(vec![]).is_err());
    }

    /// Exhaustive check on a hand-made 3x3 matrix.
    #[test]
    fn cov_mmd_by_hand() {
        let d = vec![
            vec![0.1, 0.5, 0.9],
            vec![0.2, 0.3, 0.8],
            vec![0.7, 0.6, 0.4],
        ];
        // Nearest references: 0, 0, 2. Column minima: 0.1, 0.3, 0.4.
        let (cov, mmd) = cov_mmd_from_matrix(&d).unwrap();
        assert!((cov - 2.0 / 3.0).abs() < 1e-12);
        assert!((mmd - (0.1 + 0.3 + 0.4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn report_combines_metrics() {
        let s = scene_of(unit_at(0.0, 0.0, 0.0), vec![unit_at(1.0, 0.0, 0.0)]);
        let r = compute_metrics(&s, &MetricsConfig::default()).unwrap();
        assert!(r.rooted && r.stable);
        assert_eq!(r.aor, 0.0);
        assert!(r.warnings.is_empty());
    }
}
