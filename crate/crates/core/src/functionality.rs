//! Black-box functionality objectives over an assembled scene: reaching
//! targets by inverse kinematics, packing into a box without collisions,
//! and tracking a trajectory.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_surface, Aabb, Bvh, TriMesh, FIXED_SAMPLE_SEED};
use crate::kinematics::{forward_kinematics_placed, KinematicTree, PlacementSet, PoseVector};
use crate::liegroup::{RigidTransform, Rotation, Vec3};

/// Surface samples per part used for penetration depth.
pub const PENETRATION_SAMPLES: usize = 512;
/// Parent-child contact allowance as a fraction of the child's diagonal.
pub const CONTACT_TOLERANCE: f64 = 0.005;
pub const IK_DAMPING: f64 = 1e-2;
pub const IK_STEP_CLAMP: f64 = 0.2;
pub const IK_MAX_ITERS: usize = 200;
/// IK stops once an iteration improves the residual by less than this
/// fraction.
pub const IK_STALL: f64 = 1e-9;

/// Per-part geometry shared by every scene built from the same tree.
#[derive(Debug)]
pub struct PartGeometry {
    pub bvh: Bvh,
    /// Vertices followed by fixed-seed area samples, in part coordinates.
    pub samples: Vec<Vec3>,
    pub diagonal: f64,
}

impl PartGeometry {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let count = PENETRATION_SAMPLES + mesh.vertices().len();
        let samples = sample_surface(mesh, count, FIXED_SAMPLE_SEED)?
            .into_iter()
            .map(|s| s.position)
            .collect();
        Ok(Self {
            bvh: Bvh::new(mesh.clone()),
            samples,
            diagonal: mesh.bbox_diagonal(),
        })
    }

    fn world_bounds(&self, pose: &RigidTransform) -> Aabb {
        let b = self.bvh.bounds();
        let mut out = Aabb::empty();
        for k in 0..8 {
            let c = Vec3::new(
                if k & 1 == 0 { b.min.x } else { b.max.x },
                if k & 2 == 0 { b.min.y } else { b.max.y },
                if k & 4 == 0 { b.min.z } else { b.max.z },
            );
            out.grow(&pose.apply_point(&c));
        }
        out
    }
}

/// A tree with placements for its non-root parts and the poses at which
/// objectives are evaluated.
#[derive(Clone, Debug)]
pub struct AssembledScene {
    pub tree: Arc<KinematicTree>,
    pub placements: PlacementSet,
    pub pose_set: Vec<PoseVector>,
    geometry: Arc<BTreeMap<String, PartGeometry>>,
}

impl AssembledScene {
    pub fn new(
        tree: Arc<KinematicTree>,
        placements: PlacementSet,
        pose_set: Vec<PoseVector>,
    ) -> Result<Self> {
        let geometry = tree
            .parts
            .iter()
            .map(|(id, p)| Ok((id.clone(), PartGeometry::new(&p.mesh)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let scene = Self {
            tree,
            placements,
            pose_set,
            geometry: Arc::new(geometry),
        };
        scene.check_placements()?;
        Ok(scene)
    }

    /// Same tree and cached geometry with different placements.
    pub fn with_placements(&self, placements: PlacementSet) -> Result<Self> {
        let scene = Self {
            placements,
            ..self.clone()
        };
        scene.check_placements()?;
        Ok(scene)
    }

    fn check_placements(&self) -> Result<()> {
        for id in self.tree.non_root_ids() {
            if !self.placements.contains_key(id) {
                return Err(Error::InvalidConfig(format!("no placement for part `{id}`")));
            }
        }
        Ok(())
    }

    pub fn geometry(&self, id: &str) -> Result<&PartGeometry> {
        self.geometry
            .get(id)
            .ok_or_else(|| Error::UnknownPart(id.to_owned()))
    }

    pub fn world_transforms(&self, pose: &PoseVector) -> Result<BTreeMap<String, RigidTransform>> {
        forward_kinematics_placed(&self.tree, &self.placements, pose)
    }

    /// Every part mesh moved into world coordinates at `pose`.
    pub fn world_meshes(&self, pose: &PoseVector) -> Result<Vec<(String, TriMesh)>> {
        Ok(self
            .world_transforms(pose)?
            .into_iter()
            .map(|(id, t)| {
                let mesh = self.tree.parts[&id].mesh.transformed(&t);
                (id, mesh)
            })
            .collect())
    }

    /// Summed penetration depth over all part pairs at one pose.
    /// Parent-child pairs may overlap by up to [`CONTACT_TOLERANCE`] of the
    /// child's diagonal before they count.
    pub fn penetration(&self, pose: &PoseVector) -> Result<f64> {
        let world = self.world_transforms(pose)?;
        let ids: Vec<&String> = world.keys().collect();
        let mut total = 0.0;
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let (ga, gb) = (self.geometry(a)?, self.geometry(b)?);
                let depth = pair_depth(ga, &world[*a], gb, &world[*b]);
                total += if self.tree.adjacent(a, b) {
                    let child = if self.tree.parts[a.as_str()].parent_id.as_deref() == Some(b.as_str()) {
                        ga
                    } else {
                        gb
                    };
                    (depth - CONTACT_TOLERANCE * child.diagonal).max(0.0)
                } else {
                    depth
                };
            }
        }
        Ok(total)
    }
}

/// Lower-is-better score of a scene. Closures of the right shape implement
/// it, so ad-hoc objectives need no wrapper type.
pub trait Objective: Send + Sync {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&AssembledScene) -> Result<f64> + Send + Sync,
{
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        self(scene)
    }
}

/// Cone constraint on a part-local axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularTarget {
    /// Direction in part coordinates, e.g. a lamp's beam.
    pub axis: Vec3,
    /// World direction the axis should follow. When absent the axis should
    /// point from the effector at the target, i.e. aim at it.
    #[serde(default)]
    pub direction: Option<Vec3>,
    pub max_deviation_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachTarget {
    pub part_id: String,
    /// Effector position in part coordinates.
    pub effector_point: Vec3,
    pub target: Vec3,
    #[serde(default)]
    pub angular_target: Option<AngularTarget>,
    /// Whether the effector must touch the target. Aiming-only targets set
    /// this to false and rely on the angular term.
    #[serde(default = "yes")]
    pub reach_position: bool,
}

fn yes() -> bool {
    true
}

impl ReachTarget {
    pub fn point(part_id: impl Into<String>, effector_point: Vec3, target: Vec3) -> Self {
        Self {
            part_id: part_id.into(),
            effector_point,
            target,
            angular_target: None,
            reach_position: true,
        }
    }

    /// Aim `axis` at `target` from `effector_point` within `max_deviation_deg`.
    pub fn aim(
        part_id: impl Into<String>,
        effector_point: Vec3,
        axis: Vec3,
        target: Vec3,
        max_deviation_deg: f64,
    ) -> Self {
        Self {
            part_id: part_id.into(),
            effector_point,
            target,
            angular_target: Some(AngularTarget {
                axis,
                direction: None,
                max_deviation_deg,
            }),
            reach_position: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = &self.angular_target {
            if !(a.max_deviation_deg > 0.0 && a.max_deviation_deg <= 180.0) {
                return Err(Error::InvalidConfig(format!(
                    "angular deviation must lie in (0, 180] degrees, got {}",
                    a.max_deviation_deg
                )));
            }
            if a.axis.norm() == 0.0 || a.direction.is_some_and(|d| d.norm() == 0.0) {
                return Err(Error::InvalidConfig("angular target axes must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// Angle in radians between the world axis and the wanted direction.
    pub fn angular_deviation(&self, part_world: &RigidTransform) -> Option<f64> {
        let a = self.angular_target.as_ref()?;
        let axis = part_world.apply_vector(&a.axis).normalize();
        let want = match a.direction {
            Some(d) => d.normalize(),
            None => {
                let d = self.target - part_world.apply_point(&self.effector_point);
                if d.norm() < 1e-12 {
                    return Some(0.0);
                }
                d.normalize()
            }
        };
        Some(axis.dot(&want).clamp(-1.0, 1.0).acos())
    }

    fn residual(&self, part_world: &RigidTransform) -> Vec<f64> {
        let mut r = Vec::with_capacity(4);
        if self.reach_position {
            let e = part_world.apply_point(&self.effector_point) - self.target;
            r.extend([e.x, e.y, e.z]);
        }
        if let (Some(dev), Some(a)) = (self.angular_deviation(part_world), &self.angular_target) {
            r.push((dev - a.max_deviation_deg.to_radians()).max(0.0));
        }
        r
    }
}

/// Result of one inverse-kinematics solve.
#[derive(Clone, Debug, PartialEq)]
pub struct IkSolution {
    pub pose: PoseVector,
    pub residual: f64,
    /// Residual after each accepted iteration, starting with the initial one.
    pub trace: Vec<f64>,
}

/// Damped least squares on the joint coordinates of the chain from the root
/// to `target.part_id`, starting from the rest pose. Steps are clamped to
/// [`IK_STEP_CLAMP`] per coordinate, projected into the joint limits, and
/// halved until the residual does not grow, so the trace is non-increasing.
pub fn ik_solve(
    tree: &KinematicTree,
    placements: &PlacementSet,
    target: &ReachTarget,
    max_iters: usize,
) -> Result<IkSolution> {
    target.validate()?;
    let coords: Vec<(String, usize)> = tree
        .chain(&target.part_id)?
        .into_iter()
        .filter_map(|id| tree.parts[id].joint.as_ref().map(|j| (id.to_owned(), j.dof())))
        .flat_map(|(id, n)| (0..n).map(move |k| (id.clone(), k)))
        .collect();
    if coords.is_empty() {
        return Err(Error::NoDofOnChain(target.part_id.clone()));
    }
    // Poses stay inside the joint limits, so the chain-only evaluation
    // needs no further checks.
    let residual_at = |pose: &PoseVector| -> Result<Vec<f64>> { Ok(unchecked_residual(tree, placements, target, pose)) };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let get = |pose: &PoseVector, (id, k): &(String, usize)| pose.values[id][*k];
    let set = |pose: &mut PoseVector, (id, k): &(String, usize), v: f64| {
        let theta = pose.values.get_mut(id).expect("chain joints are in the pose");
        theta[*k] = v;
    };
    let clamp_all = |pose: &mut PoseVector| {
        for (id, theta) in pose.values.iter_mut() {
            if let Some(j) = &tree.parts[id].joint {
                j.clamp(theta);
            }
        }
    };

    let mut pose = PoseVector::rest(tree);
    let mut r = residual_at(&pose)?;
    let mut trace = vec![norm(&r)];
    let h = 1e-6;
    for _ in 0..max_iters {
        let current = *trace.last().expect("trace is nonempty");
        if current < 1e-12 {
            break;
        }
        let m = r.len();
        let mut jac = DMatrix::zeros(m, coords.len());
        for (c, coord) in coords.iter().enumerate() {
            let v = get(&pose, coord);
            let mut plus = pose.clone();
            set(&mut plus, coord, v + h);
            let mut minus = pose.clone();
            set(&mut minus, coord, v - h);
            // Central differences; the joint check is skipped on purpose
            // because a coordinate may sit exactly on its limit.
            let rp = unchecked_residual(tree, placements, target, &plus);
            let rm = unchecked_residual(tree, placements, target, &minus);
            for i in 0..m {
                jac[(i, c)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let lhs = &jt * &jac + DMatrix::identity(coords.len(), coords.len()) * IK_DAMPING;
        let rhs = -(&jt * DVector::from_vec(r.clone()));
        let Some(chol) = lhs.cholesky() else { break };
        let mut step = chol.solve(&rhs);
        let biggest = step.amax();
        if biggest > IK_STEP_CLAMP {
            step *= IK_STEP_CLAMP / biggest;
        }
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..12 {
            let mut trial = pose.clone();
            for (c, coord) in coords.iter().enumerate() {
                let v = get(&trial, coord);
                set(&mut trial, coord, v + scale * step[c]);
            }
            clamp_all(&mut trial);
            let rt = residual_at(&trial)?;
            if norm(&rt) < current {
                accepted = Some((trial, rt));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, rn)) = accepted else { break };
        pose = next;
        r = rn;
        trace.push(norm(&r));
        if current - norm(&r) <= IK_STALL * current {
            break;
        }
    }
    Ok(IkSolution {
        pose,
        residual: *trace.last().expect("trace is nonempty"),
        trace,
    })
}

fn unchecked_residual(
    tree: &KinematicTree,
    placements: &PlacementSet,
    target: &ReachTarget,
    pose: &PoseVector,
) -> Vec<f64> {
    let mut world = RigidTransform::identity();
    for id in tree.chain(&target.part_id).expect("chain validated") {
        let part = &tree.parts[id];
        let place = placements.get(id).copied().unwrap_or_default();
        let motion = match &part.joint {
            Some(j) => j.motion_unchecked(&pose.values[id]),
            None => RigidTransform::identity(),
        };
        world = world * place * motion;
    }
    target.residual(&world)
}

/// Sum of squared IK residuals over the targets.
pub struct ReachObjective {
    pub targets: Vec<ReachTarget>,
}

pub fn reach_objective(targets: Vec<ReachTarget>) -> Result<ReachObjective> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("reach objective needs at least one target"));
    }
    for t in &targets {
        t.validate()?;
    }
    Ok(ReachObjective { targets })
}

impl Objective for ReachObjective {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.targets {
            let r = ik_solve(&scene.tree, &scene.placements, t, IK_MAX_ITERS)?.residual;
            total += r * r;
        }
        Ok(total)
    }
}

/// Overlap depth of two placed parts; zero when they neither cross nor
/// contain one another.
///
/// Points of either surface lying inside (or on) the other form the contact
/// set. Its narrowest width over 13 fixed directions approximates the
/// penetration depth: for two boxes overlapping by `d` along an axis it is
/// `d`, and for coincident boxes it is the full box width.
fn pair_depth(a: &PartGeometry, ta: &RigidTransform, b: &PartGeometry, tb: &RigidTransform) -> f64 {
    let eps = 1e-7 * (a.diagonal + b.diagonal);
    if !a.world_bounds(ta).expanded(eps).intersects(&b.world_bounds(tb)) {
        return 0.0;
    }
    let a_to_b = tb.inverse() * *ta;
    let b_to_a = a_to_b.inverse();
    let in_other = |p: &Vec3, other: &PartGeometry| other.bvh.distance(p) <= eps || other.bvh.contains(p);
    let crossing = a.bvh.intersects(&b.bvh, &b_to_a);
    let probe = |x: &PartGeometry, to_y: &RigidTransform, y: &PartGeometry| {
        x.samples
            .iter()
            .skip(x.bvh.mesh().vertices().len())
            .take(8)
            .any(|p| in_other(&to_y.apply_point(p), y))
    };
    if !crossing && !probe(a, &a_to_b, b) && !probe(b, &b_to_a, a) {
        return 0.0;
    }
    let mut contact: Vec<Vec3> = Vec::new();
    for p in &a.samples {
        if in_other(&a_to_b.apply_point(p), b) {
            contact.push(ta.apply_point(p));
        }
    }
    for p in &b.samples {
        if in_other(&b_to_a.apply_point(p), a) {
            contact.push(tb.apply_point(p));
        }
    }
    let width = narrowest_width(&contact, &[&ta.rotation, &tb.rotation]);
    if crossing {
        // A transversal crossing is a real overlap even when no sample
        // landed inside; keep it visible to the optimizer.
        width.max(1e-6 * (a.diagonal + b.diagonal))
    } else if width <= 10.0 * eps {
        0.0
    } else {
        width
    }
}

/// Narrowest width of `points` over the principal axes of the set and the
/// 13 box-symmetric directions (3 axes, 6 face and 4 body diagonals) of
/// every frame in `frames`. The principal axes make the estimate follow the
/// set under rigid motion; the frame directions catch axis-aligned slabs
/// whose spread is too isotropic for a stable principal axis. The best
/// candidate is then refined by a pattern search.
fn narrowest_width(points: &[Vec3], frames: &[&Rotation]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let t = 1.0 / 3f64.sqrt();
    let local = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(s, s, 0.0),
        Vec3::new(s, -s, 0.0),
        Vec3::new(s, 0.0, s),
        Vec3::new(s, 0.0, -s),
        Vec3::new(0.0, s, s),
        Vec3::new(0.0, s, -s),
        Vec3::new(t, t, t),
        Vec3::new(t, t, -t),
        Vec3::new(t, -t, t),
        Vec3::new(-t, t, t),
    ];
    let mut dirs: Vec<Vec3> = frames
        .iter()
        .flat_map(|r| local.iter().map(move |d| r.apply(d)))
        .collect();
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vec3>() / n;
    let cov = points
        .iter()
        .map(|p| (p - mean) * (p - mean).transpose())
        .sum::<nalgebra::Matrix3<f64>>()
        / n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    dirs.extend(eig.eigenvectors.column_iter().map(|c| c.into_owned()));
    let width = |d: &Vec3| {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let x = p.dot(d);
            (lo.min(x), hi.max(x))
        });
        hi - lo
    };
    let (mut best_dir, mut best) = dirs
        .iter()
        .map(|d| (*d, width(d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least the principal axes");
    // Pattern search on the sphere around the best candidate.
    let mut step = 0.2;
    while step > 1e-4 {
        let u = best_dir.cross(&if best_dir.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
        let w = best_dir.cross(&u);
        let improved = [u, -u, w, -w]
            .iter()
            .map(|t| (best_dir + step * t).normalize())
            .map(|d| (d, width(&d)))
            .find(|(_, v)| *v < best);
        match improved {
            Some((d, v)) => (best_dir, best) = (d, v),
            None => step *= 0.5,
        }
    }
    best
}

/// Summed pairwise penetration depth over world-space meshes.
pub fn collision_penetration(meshes_world: &[TriMesh]) -> Result<f64> {
    if meshes_world.len() < 2 {
        return Err(Error::InvalidMesh(
            "collision check needs at least two meshes".into(),
        ));
    }
    let geoms = meshes_world
        .iter()
        .map(PartGeometry::new)
        .collect::<Result<Vec<_>>>()?;
    let id = RigidTransform::identity();
    let mut total = 0.0;
    for i in 0..geoms.len() {
        for j in i + 1..geoms.len() {
            total += pair_depth(&geoms[i], &id, &geoms[j], &id);
        }
    }
    Ok(total)
}

/// Axis-aligned box that the whole assembly should fit into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackSpec {
    pub box_center: Vec3,
    pub box_half_extent: f64,
}

/// Squared box excess of every part at every pose plus collision depth.
pub struct PackObjective {
    pub spec: PackSpec,
}

pub fn pack_objective(spec: PackSpec) -> Result<PackObjective> {
    if !(spec.box_half_extent > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "box half extent must be positive, got {}",
            spec.box_half_extent
        )));
    }
    Ok(PackObjective { spec })
}

/// `sum_k (max(0, hi_k - box_hi_k) + max(0, box_lo_k - lo_k))^2` for one box.
pub fn box_excess(bounds: &Aabb, spec: &PackSpec) -> f64 {
    let h = spec.box_half_extent;
    (0..3)
        .map(|k| {
            let over = (bounds.max[k] - (spec.box_center[k] + h)).max(0.0);
            let under = ((spec.box_center[k] - h) - bounds.min[k]).max(0.0);
            (over + under).powi(2)
        })
        .sum()
}

/// Tight world AABB of every part at `pose`.
pub fn part_bounds(scene: &AssembledScene, pose: &PoseVector) -> Result<BTreeMap<String, Aabb>> {
    Ok(scene
        .world_transforms(pose)?
        .into_iter()
        .map(|(id, t)| {
            let b = Aabb::from_points(
                scene.tree.parts[&id]
                    .mesh
                    .vertices()
                    .iter()
                    .map(|v| t.apply_point(v))
                    .collect::<Vec<_>>()
                    .iter(),
            );
            (id, b)
        })
        .collect())
}

impl Objective for PackObjective {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        let mut total = 0.0;
        for pose in &scene.pose_set {
            for b in part_bounds(scene, pose)?.values() {
                total += box_excess(b, &self.spec);
            }
            total += scene.penetration(pose)?;
        }
        Ok(total)
    }
}

/// Collision depth summed over the scene's poses, without any box term.
pub struct CollisionObjective;

pub fn collision_objective() -> CollisionObjective {
    CollisionObjective
}

impl Objective for CollisionObjective {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        scene
            .pose_set
            .iter()
            .map(|p| scene.penetration(p))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub part_id: String,
    pub effector_point: Vec3,
    /// `(time, world point)` with strictly increasing times in `[0, 1]`.
    pub waypoints: Vec<(f64, Vec3)>,
}

/// Mean squared IK residual over the waypoints.
pub struct TrajectoryObjective {
    pub trajectory: Trajectory,
}

pub fn trajectory_objective(traj: Trajectory) -> Result<TrajectoryObjective> {
    if traj.waypoints.len() < 2 {
        return Err(Error::InvalidConfig("a trajectory needs at least two waypoints".into()));
    }
    let mut last = f64::NEG_INFINITY;
    for &(t, _) in &traj.waypoints {
        if !(0.0..=1.0).contains(&t) || t <= last {
            return Err(Error::InvalidConfig(
                "waypoint times must increase strictly within [0, 1]".into(),
            ));
        }
        last = t;
    }
    Ok(TrajectoryObjective { trajectory: traj })
}

impl Objective for TrajectoryObjective {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        let t = &self.trajectory;
        let mut total = 0.0;
        for (_, point) in &t.waypoints {
            let target = ReachTarget::point(t.part_id.clone(), t.effector_point, *point);
            let r = ik_solve(&scene.tree, &scene.placements, &target, IK_MAX_ITERS)?.residual;
            total += r * r;
        }
        Ok(total / t.waypoints.len() as f64)
    }
}

/// Weighted sum of objectives.
pub struct CombinedObjective {
    pub terms: Vec<(Box<dyn Objective>, f64)>,
}

pub fn combine_objectives(terms: Vec<(Box<dyn Objective>, f64)>) -> Result<CombinedObjective> {
    for (_, w) in &terms {
        if !(*w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "objective weights must be positive, got {w}"
            )));
        }
    }
    Ok(CombinedObjective { terms })
}

impl Objective for CombinedObjective {
    fn evaluate(&self, scene: &AssembledScene) -> Result<f64> {
        let mut parts = self
            .terms
            .iter()
            .map(|(o, w)| Ok(w * o.evaluate(scene)?))
            .collect::<Result<Vec<f64>>>()?;
        // Summing in sorted order makes the value independent of term order.
        parts.sort_by(f64::total_cmp);
        Ok(parts.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;
    use crate::kinematics::{JointSpec, KinematicPart};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn cube_at(x: f64) -> TriMesh {
        cuboid(v(x, 0.0, 0.0), v(x + 1.0, 1.0, 1.0), 1)
    }

    /// Planar arm: unit links along x, revolute about z at x = 0 and x = 1.
    fn two_link() -> KinematicTree {
        let base = cuboid(v(-0.2, -0.2, -0.3), v(0.2, 0.2, -0.1), 1);
        let link = |x0: f64| cuboid(v(x0, -0.05, -0.05), v(x0 + 1.0, 0.05, 0.05), 1);
        let j1 = JointSpec::revolute(RigidTransform::identity(), Vec3::z(), -PI, PI).unwrap();
        let j2 = JointSpec::revolute(RigidTransform::from_translation(v(1.0, 0.0, 0.0)), Vec3::z(), -PI, PI)
            .unwrap();
        KinematicTree::new([
            KinematicPart::root("base", base),
            KinematicPart::child("l1", link(0.0), "base", Some(j1)),
            KinematicPart::child("l2", link(1.0), "l1", Some(j2)),
        ])
        .unwrap()
    }

    fn identity_placements(tree: &KinematicTree) -> PlacementSet {
        tree.non_root_ids()
            .into_iter()
            .map(|id| (id.to_owned(), RigidTransform::identity()))
            .collect()
    }

    fn tip(target: Vec3) -> ReachTarget {
        ReachTarget::point("l2", v(2.0, 0.0, 0.0), target)
    }

    #[test]
    fn reached_target_leaves_rest_pose() {
        let tree = two_link();
        let sol = ik_solve(&tree, &identity_placements(&tree), &tip(v(2.0, 0.0, 0.0)), 200).unwrap();
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.pose, PoseVector::rest(&tree));
    }

    #[test]
    fn two_link_reaches_inside_workspace() {
        let tree = two_link();
        let sol = ik_solve(&tree, &identity_placements(&tree), &tip(v(1.0, 1.0, 0.0)), 200).unwrap();
        assert!(sol.residual < 1e-3, "residual {}", sol.residual);
        // Independent check: the analytic elbow angle for distance sqrt(2)
        // with unit links is +-pi/2.
        let elbow = sol.pose.get("l2").unwrap()[0];
        assert!((elbow.abs() - FRAC_PI_2).abs() < 1e-2);
        assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unreachable_target_stops_at_boundary() {
        let tree = two_link();
        let sol = ik_solve(&tree, &identity_placements(&tree), &tip(v(0.0, 3.0, 0.0)), 200).unwrap();
        assert!((sol.residual - 1.0).abs() < 1e-2, "residual {}", sol.residual);
        assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn joint_free_chain_is_rejected() {
        let tree = KinematicTree::new([
            KinematicPart::root("a", cube_at(0.0)),
            KinematicPart::child("b", cube_at(2.0), "a", None),
        ])
        .unwrap();
        let err = ik_solve(&tree, &identity_placements(&tree), &ReachTarget::point("b", Vec3::zeros(), Vec3::x()), 10);
        assert!(matches!(err, Err(Error::NoDofOnChain(_))));
    }

    #[test]
    fn aiming_turns_the_axis_onto_the_target() {
        let tree = two_link();
        let t = ReachTarget::aim("l2", v(2.0, 0.0, 0.0), Vec3::x(), v(0.0, 3.0, 0.0), 1.0);
        let sol = ik_solve(&tree, &identity_placements(&tree), &t, 200).unwrap();
        assert!(sol.residual < 1e-6, "residual {}", sol.residual);
        let world = forward_kinematics_placed(&tree, &identity_placements(&tree), &sol.pose).unwrap();
        assert!(t.angular_deviation(&world["l2"]).unwrap().to_degrees() <= 1.0 + 1e-6);
    }

    fn scene(tree: KinematicTree) -> AssembledScene {
        let placements = identity_placements(&tree);
        let rest = PoseVector::rest(&tree);
        AssembledScene::new(Arc::new(tree), placements, vec![rest]).unwrap()
    }

    #[test]
    fn reach_objective_sums_squared_residuals() {
        let s = scene(two_link());
        let reached = reach_objective(vec![tip(v(2.0, 0.0, 0.0))]).unwrap();
        assert_eq!(reached.evaluate(&s).unwrap(), 0.0);
        let beyond = tip(v(0.0, 2.5, 0.0));
        let one = reach_objective(vec![beyond.clone()]).unwrap().evaluate(&s).unwrap();
        assert!((one - 0.25).abs() < 1e-2, "value {one}");
        let two = reach_objective(vec![beyond.clone(), beyond]).unwrap().evaluate(&s).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-9);
    }

    #[test]
    fn disjoint_cubes_do_not_collide() {
        assert_eq!(collision_penetration(&[cube_at(0.0), cube_at(1.5)]).unwrap(), 0.0);
    }

    #[test]
    fn overlap_depth_matches_axis_overlap() {
        let d = collision_penetration(&[cube_at(0.0), cube_at(0.7)]).unwrap();
        assert!((d - 0.3).abs() < 0.03, "depth {d}");
        let swapped = collision_penetration(&[cube_at(0.7), cube_at(0.0)]).unwrap();
        assert!((d - swapped).abs() < 1e-12);
    }

    #[test]
    fn coincident_cubes_have_full_depth() {
        let d = collision_penetration(&[cube_at(0.0), cube_at(0.0)]).unwrap();
        assert!((d - 1.0).abs() < 0.1, "depth {d}");
    }

    #[test]
    fn contained_cube_is_detected_without_crossings() {
        let inner = cuboid(v(0.3, 0.3, 0.3), v(0.6, 0.6, 0.6), 1);
        let d = collision_penetration(&[cube_at(0.0), inner]).unwrap();
        assert!((d - 0.3).abs() < 0.03, "depth {d}");
    }

    #[test]
    fn depth_survives_a_common_rigid_motion() {
        let m = RigidTransform::new(
            Rotation::from_axis_angle(&v(1.0, 2.0, 0.5).normalize(), 0.7),
            v(3.0, -1.0, 2.0),
        );
        let d0 = collision_penetration(&[cube_at(0.0), cube_at(0.7)]).unwrap();
        let d1 = collision_penetration(&[cube_at(0.0).transformed(&m), cube_at(0.7).transformed(&m)]).unwrap();
        assert!((d0 - d1).abs() <= 0.1 * d0, "{d0} vs {d1}");
    }

    #[test]
    fn collision_needs_two_meshes() {
        assert!(collision_penetration(&[cube_at(0.0)]).is_err());
    }

    fn boxes_scene(offset: f64) -> AssembledScene {
        let tree = KinematicTree::new([
            KinematicPart::root("a", cube_at(0.0)),
            KinematicPart::child("b", cube_at(2.0), "a", None),
            KinematicPart::child("c", cube_at(4.0 + offset), "a", None),
        ])
        .unwrap();
        scene(tree)
    }

    #[test]
    fn pack_objective_measures_box_excess() {
        let s = boxes_scene(0.0);
        let fits = pack_objective(PackSpec { box_center: v(2.5, 0.5, 0.5), box_half_extent: 2.5 }).unwrap();
        assert_eq!(fits.evaluate(&s).unwrap(), 0.0);
        let poke = boxes_scene(0.2);
        assert!((fits.evaluate(&poke).unwrap() - 0.04).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..=5 {
            let h = 2.5 * (1.0 - 0.1 * k as f64);
            let o = pack_objective(PackSpec { box_center: v(2.5, 0.5, 0.5), box_half_extent: h }).unwrap();
            let val = o.evaluate(&s).unwrap();
            assert!(val > last);
            last = val;
        }
    }

    #[test]
    fn pack_objective_counts_sibling_collisions() {
        let tree = KinematicTree::new([
            KinematicPart::root("a", cuboid(v(0.0, 0.0, -1.0), v(3.0, 1.0, -0.5), 1)),
            KinematicPart::child("b", cube_at(0.0), "a", None),
            KinematicPart::child("c", cube_at(0.7), "a", None),
        ])
        .unwrap();
        let s = scene(tree);
        let o = pack_objective(PackSpec { box_center: v(1.5, 0.5, 0.0), box_half_extent: 5.0 }).unwrap();
        let val = o.evaluate(&s).unwrap();
        assert!((val - 0.3).abs() < 0.03, "value {val}");
    }

    #[test]
    fn parent_child_contact_is_tolerated() {
        // Child overlaps its parent by far less than 0.5% of its diagonal.
        let tree = KinematicTree::new([
            KinematicPart::root("a", cube_at(0.0)),
            KinematicPart::child("b", cube_at(0.999), "a", None),
        ])
        .unwrap();
        let s = scene(tree);
        assert_eq!(s.penetration(&s.pose_set[0]).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_objective_cases() {
        let s = scene(two_link());
        let inside = Trajectory {
            part_id: "l2".into(),
            effector_point: v(2.0, 0.0, 0.0),
            waypoints: vec![(0.0, v(1.5, 0.5, 0.0)), (0.5, v(1.0, 1.0, 0.0)), (1.0, v(0.5, 1.2, 0.0))],
        };
        assert!(trajectory_objective(inside).unwrap().evaluate(&s).unwrap() < 1e-4);
        let still = Trajectory {
            part_id: "l2".into(),
            effector_point: v(2.0, 0.0, 0.0),
            waypoints: vec![(0.0, v(2.0, 0.0, 0.0)), (1.0, v(2.0, 0.0, 0.0))],
        };
        assert_eq!(trajectory_objective(still).unwrap().evaluate(&s).unwrap(), 0.0);
        let fixed = boxes_scene(0.0);
        let t = Trajectory {
            part_id: "b".into(),
            effector_point: Vec3::zeros(),
            waypoints: vec![(0.0, Vec3::zeros()), (1.0, Vec3::x())],
        };
        assert!(matches!(
            trajectory_objective(t).unwrap().evaluate(&fixed),
            Err(Error::NoDofOnChain(_))
        ));
    }

    #[test]
    fn combined_objective_is_weighted_sum() {
        let s = boxes_scene(0.0);
        let two = |_: &AssembledScene| Ok(2.0);
        let three = |_: &AssembledScene| Ok(3.0);
        let single = combine_objectives(vec![(Box::new(two), 1.0)]).unwrap();
        assert_eq!(single.evaluate(&s).unwrap(), 2.0);
        let c = combine_objectives(vec![(Box::new(two), 1.0), (Box::new(three), 2.0)]).unwrap();
        assert_eq!(c.evaluate(&s).unwrap(), 8.0);
        let swapped = combine_objectives(vec![(Box::new(three), 2.0), (Box::new(two), 1.0)]).unwrap();
        assert!((swapped.evaluate(&s).unwrap() - 8.0).abs() < 1e-12);
        assert!(combine_objectives(vec![(Box::new(two), 0.0)]).is_err());
    }

    #[test]
    fn objectives_leave_the_scene_untouched() {
        let s = scene(two_link());
        let before = (s.placements.clone(), s.pose_set.clone());
        reach_objective(vec![tip(v(1.0, 1.0, 0.0))]).unwrap().evaluate(&s).unwrap();
        pack_objective(PackSpec { box_center: Vec3::zeros(), box_half_extent: 0.5 })
            .unwrap()
            .evaluate(&s)
            .unwrap();
        assert_eq!(before, (s.placements.clone(), s.pose_set.clone()));
    }
}
