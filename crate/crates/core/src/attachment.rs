//! Kinematics-aware attachment energy and the alternating local-global solver.
//!
//! A part is sampled once on its rest mesh. At each articulation snapshot the
//! samples are carried by the joint motion, and their offsets to the source
//! parent form the reference field. A candidate placement `P` is scored by how
//! well the rotated reference offsets agree with the offsets to the new
//! parent, measured along the new parent's normals under a Welsch loss.

use std::sync::Arc;

use nalgebra::{Matrix6, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_vdf, vdf_source_samples, Bvh, SurfaceSample, TriMesh, VdfSnapshot};
use crate::kinematics::{sample_joint_poses, KinematicPart, KinematicTree, PoseVector};
use crate::liegroup::{hat, lie_mean, se3_exp, se3_log, RigidTransform, Twist, Vec3};

/// `1 - exp(-x^2 / (2 nu^2))`.
pub fn welsch(x: f64, nu: f64) -> f64 {
    -(-(x * x) / (2.0 * nu * nu)).exp_m1()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_outer_iters: usize,
    pub irls_iters: usize,
    pub welsch_nu: f64,
    pub convergence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 10.0,
            max_outer_iters: 20,
            irls_iters: 4,
            welsch_nu: 0.5,
            convergence_tol: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.welsch_nu > 0.0) || !self.welsch_nu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "welsch_nu must be positive, got {}",
                self.welsch_nu
            )));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Precomputed data for attaching one part to a new parent.
#[derive(Clone, Debug)]
pub struct AttachmentProblem {
    pub part_id: String,
    pub reference_vdfs: Vec<VdfSnapshot>,
    pub new_parent: Arc<Bvh>,
    pub poses: Vec<PoseVector>,
    pub part_rest_samples: Vec<SurfaceSample>,
    /// Joint motion at each snapshot.
    pub joint_motions: Vec<RigidTransform>,
    /// Per snapshot, per sample: posed sample plus its reference offset, i.e.
    /// the source-parent projection in the part frame.
    anchors: Vec<Vec<Vec3>>,
}

impl AttachmentProblem {
    /// Assembles a problem from explicit joint snapshots.
    pub fn from_snapshots(
        part: &KinematicPart,
        source_parent: &Bvh,
        new_parent: Arc<Bvh>,
        joint_poses: Vec<Vec<f64>>,
        samples: Vec<SurfaceSample>,
    ) -> Result<Self> {
        if joint_poses.is_empty() {
            return Err(Error::EmptyInput("attachment snapshots"));
        }
        let mut reference_vdfs = Vec::with_capacity(joint_poses.len());
        let mut joint_motions = Vec::with_capacity(joint_poses.len());
        let mut poses = Vec::with_capacity(joint_poses.len());
        for theta in joint_poses {
            let motion = match &part.joint {
                Some(j) => {
                    j.check(&part.id, &theta)?;
                    j.motion_unchecked(&theta)
                }
                None => RigidTransform::identity(),
            };
            let posed: Vec<SurfaceSample> = samples.iter().map(|s| s.transformed(&motion)).collect();
            reference_vdfs.push(compute_vdf(&posed, source_parent)?);
            joint_motions.push(motion);
            let mut pose = PoseVector::default();
            if part.joint.is_some() {
                pose.values.insert(part.id.clone(), theta);
            }
            poses.push(pose);
        }
        let mut problem = Self {
            part_id: part.id.clone(),
            reference_vdfs,
            new_parent,
            poses,
            part_rest_samples: samples,
            joint_motions,
            anchors: Vec::new(),
        };
        problem.rebuild_anchors();
        Ok(problem)
    }

    fn rebuild_anchors(&mut self) {
        self.anchors = self
            .reference_vdfs
            .iter()
            .map(|v| {
                v.samples
                    .iter()
                    .zip(&v.offsets)
                    .map(|(s, u)| s.position + u)
                    .collect()
            })
            .collect();
    }

    /// The same problem with every reference offset set to zero, which turns
    /// the energy into plain robust point-to-plane registration.
    pub fn with_zero_reference(&self) -> Self {
        let mut p = self.clone();
        for v in &mut p.reference_vdfs {
            v.offsets.iter_mut().for_each(|o| *o = Vec3::zeros());
        }
        p.rebuild_anchors();
        p
    }

    /// Keeps only the listed snapshots.
    pub fn restricted(&self, indices: &[usize]) -> Self {
        let pick = |i: &usize| *i;
        Self {
            part_id: self.part_id.clone(),
            reference_vdfs: indices.iter().map(|i| self.reference_vdfs[pick(i)].clone()).collect(),
            new_parent: self.new_parent.clone(),
            poses: indices.iter().map(|i| self.poses[pick(i)].clone()).collect(),
            part_rest_samples: self.part_rest_samples.clone(),
            joint_motions: indices.iter().map(|i| self.joint_motions[pick(i)]).collect(),
            anchors: indices.iter().map(|i| self.anchors[pick(i)].clone()).collect(),
        }
    }

    pub fn pose_count(&self) -> usize {
        self.reference_vdfs.len()
    }

    pub fn sample_count(&self) -> usize {
        self.part_rest_samples.len()
    }

    /// Total number of residual terms, `N * samples`.
    pub fn term_count(&self) -> usize {
        self.anchors.iter().map(Vec::len).sum()
    }

    /// Robust residuals `(P a - c) . n` for one snapshot, where `c` and `n`
    /// come from projecting the placed posed sample onto the new parent.
    pub fn residuals(&self, pose_index: usize, placement: &RigidTransform) -> Vec<f64> {
        self.reference_vdfs[pose_index]
            .samples
            .iter()
            .zip(&self.anchors[pose_index])
            .map(|(s, a)| {
                let x = placement.apply_point(&s.position);
                let (c, n) = plane_at(&self.new_parent, &x);
                (placement.apply_point(a) - c).dot(&n)
            })
            .collect()
    }

    fn pose_energy(&self, pose_index: usize, placement: &RigidTransform, nu: f64) -> f64 {
        self.residuals(pose_index, placement)
            .into_iter()
            .map(|r| welsch(r, nu))
            .sum()
    }
}

/// Closest point on the parent and the plane normal used for the residual.
/// Off the surface this is the direction from the closest point to `x`,
/// i.e. the gradient of the distance field. It coincides with the face
/// normal over face interiors and stays meaningful when the projection
/// lands on an edge or vertex, where a blended feature normal would tilt
/// the residual plane away from the actual offset.
fn plane_at(parent: &Bvh, x: &Vec3) -> (Vec3, Vec3) {
    let proj = parent.closest_point(x);
    if proj.distance > 1e-9 {
        (proj.point, (x - proj.point) / proj.distance)
    } else {
        (proj.point, proj.normal)
    }
}

/// Builds a problem from the part's own joint snapshots against `new_parent`.
pub fn build_problem(
    part: &KinematicPart,
    tree: &KinematicTree,
    new_parent: &TriMesh,
    snapshots_per_dof: usize,
) -> Result<AttachmentProblem> {
    tree.part(&part.id)?;
    let source = part
        .source_parent_mesh
        .as_ref()
        .ok_or_else(|| Error::MissingSourceParent(part.id.clone()))?;
    if snapshots_per_dof < 2 && part.joint.is_some() {
        return Err(Error::InvalidConfig(format!(
            "snapshots_per_dof must be at least 2, got {snapshots_per_dof}"
        )));
    }
    AttachmentProblem::from_snapshots(
        part,
        &Bvh::new(source.clone()),
        Arc::new(Bvh::new(new_parent.clone())),
        sample_joint_poses(part.joint.as_ref(), snapshots_per_dof),
        vdf_source_samples(&part.mesh),
    )
}

/// Summed Welsch energy over all snapshots and samples.
pub fn eval_ekm(problem: &AttachmentProblem, placement: &RigidTransform) -> f64 {
    eval_ekm_with(problem, placement, SolverConfig::default().welsch_nu)
}

pub fn eval_ekm_with(problem: &AttachmentProblem, placement: &RigidTransform, nu: f64) -> f64 {
    let per_pose: Vec<f64> = (0..problem.pose_count())
        .into_par_iter()
        .map(|i| problem.pose_energy(i, placement, nu))
        .collect();
    per_pose.into_iter().sum()
}

struct Linearization {
    objective: f64,
    hessian: Matrix6<f64>,
    gradient: Vector6<f64>,
}

/// Objective of one local step at `q`, with its IRLS-weighted normal system.
fn linearize(
    problem: &AttachmentProblem,
    pose_index: usize,
    anchor: &RigidTransform,
    q: &RigidTransform,
    config: &SolverConfig,
) -> Result<Linearization> {
    let nu2 = config.welsch_nu * config.welsch_nu;
    let rt = q.rotation.inverse();
    let mut hessian = Matrix6::zeros();
    let mut gradient = Vector6::zeros();
    let mut data = 0.0;
    for (s, a) in problem.reference_vdfs[pose_index]
        .samples
        .iter()
        .zip(&problem.anchors[pose_index])
    {
        let (c, n) = plane_at(&problem.new_parent, &q.apply_point(&s.position));
        let r = (q.apply_point(a) - c).dot(&n);
        let w = (-(r * r) / (2.0 * nu2)).exp();
        data += -(-(r * r) / (2.0 * nu2)).exp_m1();
        let m = rt.apply(&n);
        let am = a.cross(&m);
        let j = Vector6::new(am.x, am.y, am.z, m.x, m.y, m.z);
        hessian += (w / nu2) * j * j.transpose();
        gradient += (w * r / nu2) * j;
    }
    let e = se3_log(&(q.inverse() * *anchor))?.0;
    Ok(Linearization {
        objective: data + 0.5 * config.rho * e.norm_squared(),
        hessian: hessian + Matrix6::identity() * config.rho,
        gradient: gradient - config.rho * e,
    })
}

/// Per-snapshot fit `Q_i` minimizing the snapshot energy plus
/// `(rho/2) |Log(Q^-1 P)|^2` by reweighted Gauss-Newton sweeps, refreshing
/// correspondences before each sweep.
pub fn local_step(
    problem: &AttachmentProblem,
    pose_index: usize,
    anchor: &RigidTransform,
    q_init: &RigidTransform,
    config: &SolverConfig,
) -> Result<RigidTransform> {
    if pose_index >= problem.pose_count() {
        return Err(Error::InvalidConfig(format!(
            "pose index {pose_index} out of range for {} snapshots",
            problem.pose_count()
        )));
    }
    let mut q = *q_init;
    let mut lin = linearize(problem, pose_index, anchor, &q, config)?;
    for _ in 0..config.irls_iters {
        let step = lin
            .hessian
            .cholesky()
            .ok_or(Error::SingularSystem)?
            .solve(&(-lin.gradient));
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        // Halve the step while the refreshed objective rises; correspondence
        // flips make the quadratic model unreliable far from the anchor.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..4 {
            let trial = q * se3_exp(&Twist(step * scale));
            let next = linearize(problem, pose_index, anchor, &trial, config)?;
            if next.objective <= lin.objective {
                accepted = Some((trial, next));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, next)) => {
                q = trial;
                lin = next;
            }
            None => break,
        }
    }
    Ok(q)
}

/// Lie-algebra average of the per-snapshot fits.
pub fn global_step(per_pose: &[RigidTransform]) -> Result<RigidTransform> {
    lie_mean(per_pose)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttachmentResult {
    /// Final placement; never worse than the initial one.
    pub placement: RigidTransform,
    pub per_pose_transforms: Vec<RigidTransform>,
    /// Energy of the accepted placement: entry 0 is the initial placement, entry k follows
    /// outer iteration k.
    pub energy_trace: Vec<f64>,
    /// Energy of each outer iteration's candidate, including rejected ones.
    pub iterate_energies: Vec<f64>,
    pub converged: bool,
}

impl AttachmentResult {
    pub fn energy(&self) -> f64 {
        *self.energy_trace.last().expect("trace is nonempty")
    }

    pub fn iterations(&self) -> usize {
        self.energy_trace.len() - 1
    }
}

/// Alternates parallel local steps with the global average until the
/// relative energy decrease drops below the tolerance.
pub fn solve_attachment(
    problem: &AttachmentProblem,
    init: &RigidTransform,
    config: &SolverConfig,
) -> Result<AttachmentResult> {
    config.validate()?;
    let nu = config.welsch_nu;
    let mut placement = *init;
    let mut energy = eval_ekm_with(problem, &placement, nu);
    let mut trace = vec![energy];
    let mut iterates = vec![energy];
    let mut qs = vec![placement; problem.pose_count()];
    let tiny = 1e-12 * problem.term_count().max(1) as f64;
    let mut converged = energy <= tiny;
    // A step that raises the energy is rejected and retried from the same
    // anchor with a tenfold stiffer penalty; accepted steps relax it again.
    let mut step_config = config.clone();
    let mut iter = 0;
    while !converged && iter < config.max_outer_iters {
        iter += 1;
        let anchor = placement;
        // Each local step restarts from the anchor. Warm starts from the
        // previous local optimum let the per-pose solutions drift into
        // separate basins whose average stalls.
        let local = (0..problem.pose_count())
            .into_par_iter()
            .map(|i| local_step(problem, i, &anchor, &anchor, &step_config))
            .collect::<Result<Vec<_>>>()?;
        let candidate = global_step(&local)?;
        let next = eval_ekm_with(problem, &candidate, nu);
        iterates.push(next);
        if next <= energy {
            qs = local;
            placement = candidate;
            converged = next <= tiny || energy - next <= config.convergence_tol * energy;
            energy = next;
            step_config.rho = (step_config.rho / 10.0).max(config.rho);
        } else {
            step_config.rho *= 10.0;
        }
        trace.push(energy);
    }
    Ok(AttachmentResult {
        placement,
        per_pose_transforms: qs,
        energy_trace: trace,
        iterate_energies: iterates,
        converged,
    })
}

/// Solves from several initial placements and keeps the lowest final energy.
/// Later starts replace earlier ones only when better by more than `1e-9`
/// per residual term, so near-ties resolve to the earlier start.
pub fn multistart(
    problem: &AttachmentProblem,
    inits: &[RigidTransform],
    config: &SolverConfig,
) -> Result<AttachmentResult> {
    let margin = 1e-9 * problem.term_count() as f64;
    let mut best: Option<AttachmentResult> = None;
    for init in inits {
        let r = solve_attachment(problem, init, config)?;
        best = match best {
            Some(b) if r.energy() + margin >= b.energy() => Some(b),
            _ => Some(r),
        };
    }
    best.ok_or(Error::EmptyInput("multistart needs at least one initial placement"))
}

/// Jacobian of `(Q a)` under a right perturbation, for tests and diagnostics.
pub fn point_jacobian(q: &RigidTransform, a: &Vec3) -> nalgebra::Matrix3x6<f64> {
    let r = q.rotation.matrix();
    let mut j = nalgebra::Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r * hat(a)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(r);
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::kinematics::JointSpec;
    use crate::liegroup::{geodesic_norm, Rotation};

    #[test]
    fn welsch_values() {
        assert_eq!(welsch(0.0, 0.5), 0.0);
        assert!((welsch(0.5, 0.5) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!(welsch(100.0, 0.5) > 1.0 - 1e-12);
        assert_eq!(welsch(-0.3, 0.5), welsch(0.3, 0.5));
    }

    fn point_over_plane(offset: f64) -> AttachmentProblem {
        let plane = primitives::grid_plane((-3.0, -3.0), (3.0, 3.0), 0.0, 2);
        let part = KinematicPart::child(
            "p",
            primitives::cuboid(Vec3::new(-0.1, -0.1, 0.0), Vec3::new(0.1, 0.1, 0.1), 1),
            "root",
            None,
        );
        let sample = SurfaceSample {
            position: Vec3::new(0.0, 0.0, offset),
            face_index: 0,
            barycentric: Vec3::new(1.0, 0.0, 0.0),
        };
        let bvh = Arc::new(Bvh::new(plane));
        AttachmentProblem::from_snapshots(&part, &bvh, bvh.clone(), vec![vec![]], vec![sample]).unwrap()
    }

    #[test]
    fn planar_energy_matches_closed_form() {
        let p = point_over_plane(0.0);
        for dz in [0.0, 0.1, 0.37, -0.2] {
            let e = eval_ekm(&p, &RigidTransform::from_translation(Vec3::new(0.3, -0.2, dz)));
            assert!((e - welsch(dz, 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn local_step_pulls_point_onto_plane() {
        let p = point_over_plane(0.0);
        let start = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.2));
        let cfg = SolverConfig {
            rho: 1e-9,
            irls_iters: 10,
            ..SolverConfig::default()
        };
        let q = local_step(&p, 0, &start, &start, &cfg).unwrap();
        assert!(q.apply_point(&Vec3::zeros()).z.abs() < 1e-4);
    }

    #[test]
    fn huge_rho_keeps_anchor() {
        let p = point_over_plane(0.0);
        let start = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.2));
        let cfg = SolverConfig {
            rho: 1e12,
            ..SolverConfig::default()
        };
        let q = local_step(&p, 0, &start, &start, &cfg).unwrap();
        assert!(geodesic_norm(&q, &start).unwrap() < 1e-6);
    }

    #[test]
    fn nonpositive_rho_rejected() {
        let p = point_over_plane(0.0);
        let cfg = SolverConfig {
            rho: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_attachment(&p, &RigidTransform::identity(), &cfg).is_err());
    }

    #[test]
    fn self_attachment_is_fixed_point() {
        let base = primitives::cuboid(Vec3::new(-1.0, -1.0, -0.2), Vec3::new(1.0, 1.0, 0.0), 2);
        let flap = primitives::cuboid(Vec3::new(0.0, -0.3, 0.02), Vec3::new(0.6, 0.3, 0.08), 2);
        let joint = JointSpec::revolute(
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.05)),
            Vec3::y(),
            -1.0,
            0.0,
        )
        .unwrap();
        let part = KinematicPart::child("flap", flap, "base", Some(joint)).with_source_parent(base.clone());
        let tree = KinematicTree::new([KinematicPart::root("base", base.clone()), part.clone()]).unwrap();
        let prob = build_problem(&part, &tree, &base, 5).unwrap();
        assert_eq!(prob.pose_count(), 5);
        let res = solve_attachment(&prob, &RigidTransform::identity(), &SolverConfig::default()).unwrap();
        assert!(res.energy() < 1e-6 * prob.term_count() as f64);
        assert!(res.iterations() <= 2);
        let q = local_step(&prob, 2, &RigidTransform::identity(), &RigidTransform::identity(), &SolverConfig::default()).unwrap();
        assert!(geodesic_norm(&q, &RigidTransform::identity()).unwrap() < 1e-6);
        let _ = Rotation::identity();
    }

    #[test]
    fn point_jacobian_matches_finite_difference() {
        let q = RigidTransform::from_axis_angle_translation(Vec3::new(0.3, -0.2, 0.5), Vec3::new(1.0, 2.0, 3.0));
        let a = Vec3::new(0.4, -0.7, 0.2);
        let j = point_jacobian(&q, &a);
        for k in 0..6 {
            let mut d = Vector6::zeros();
            d[k] = 1e-6;
            let plus = (q * se3_exp(&Twist(d))).apply_point(&a);
            let minus = (q * se3_exp(&Twist(-d))).apply_point(&a);
            let fd = (plus - minus) / 2e-6;
            assert!((fd - j.column(k)).norm() < 1e-7);
        }
    }
}
