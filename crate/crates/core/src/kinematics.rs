//! Joints, kinematic trees and forward kinematics.
//!
//! Every part mesh lives in its own local frame. A joint's `origin` places the
//! joint frame in that local frame, and the joint axis is expressed in the
//! joint frame; the resulting motion is `origin * M(theta) * origin^-1`, so a
//! revolute joint spins the part about an axis through the joint origin.
//!
//! A part's world transform is
//! `world(parent) * placement(part) * joint_motion(part, theta)`, where the
//! placement is the rigid transform being optimized (identity when absent).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{round_significant, TriMesh};
use crate::liegroup::{RigidTransform, Rotation, Vec3};

/// Per-part rigid placements relative to the parent frame, keyed by part id.
pub type PlacementSet = BTreeMap<String, RigidTransform>;

/// Significant digits kept when placements are written out.
pub const PLACEMENT_DIGITS: usize = 12;

/// Serialized form of one placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRecord {
    pub part_id: String,
    pub rotation_axis_angle: [f64; 3],
    pub translation: [f64; 3],
}

/// Records in part-id order, rounded to [`PLACEMENT_DIGITS`].
pub fn placement_records(placements: &PlacementSet) -> Vec<PlacementRecord> {
    let round = |v: Vec3| v.map(|x| round_significant(x, PLACEMENT_DIGITS)).into();
    placements
        .iter()
        .map(|(id, t)| PlacementRecord {
            part_id: id.clone(),
            rotation_axis_angle: round(t.rotation.log()),
            translation: round(t.translation),
        })
        .collect()
}

pub fn placements_from_records(records: &[PlacementRecord]) -> Result<PlacementSet> {
    let mut out = PlacementSet::new();
    for r in records {
        let t = RigidTransform::from_axis_angle_translation(r.rotation_axis_angle.into(), r.translation.into());
        if out.insert(r.part_id.clone(), t).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate placement for part `{}`", r.part_id)));
        }
    }
    Ok(out)
}

/// Snapshots per degree of freedom used when nothing else is configured.
pub const DEFAULT_SNAPSHOTS_PER_DOF: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Cylindrical,
    Cartesian,
}

impl JointKind {
    pub fn dof(self) -> usize {
        match self {
            JointKind::Revolute | JointKind::Prismatic => 1,
            JointKind::Cylindrical => 2,
            JointKind::Cartesian => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    pub origin: RigidTransform,
    pub axis: Vec3,
    pub limits: Vec<(f64, f64)>,
}

impl JointSpec {
    pub fn new(
        kind: JointKind,
        origin: RigidTransform,
        axis: Vec3,
        limits: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if limits.len() != kind.dof() {
            return Err(Error::InvalidJoint(format!(
                "{kind:?} joint needs {} limit intervals, got {}",
                kind.dof(),
                limits.len()
            )));
        }
        for (i, &(lo, hi)) in limits.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidJoint(format!(
                    "limit {i} [{lo}, {hi}] must be finite with lo <= hi"
                )));
            }
        }
        if kind != JointKind::Cartesian && ((axis.norm() - 1.0).abs() > 1e-9 || !axis.norm().is_finite()) {
            return Err(Error::InvalidJoint(format!(
                "axis {:?} is not unit length",
                axis.as_slice()
            )));
        }
        Ok(Self {
            kind,
            origin,
            axis,
            limits,
        })
    }

    pub fn revolute(origin: RigidTransform, axis: Vec3, lo: f64, hi: f64) -> Result<Self> {
        Self::new(JointKind::Revolute, origin, axis, vec![(lo, hi)])
    }

    pub fn prismatic(origin: RigidTransform, axis: Vec3, lo: f64, hi: f64) -> Result<Self> {
        Self::new(JointKind::Prismatic, origin, axis, vec![(lo, hi)])
    }

    pub fn cylindrical(
        origin: RigidTransform,
        axis: Vec3,
        angle: (f64, f64),
        slide: (f64, f64),
    ) -> Result<Self> {
        Self::new(JointKind::Cylindrical, origin, axis, vec![angle, slide])
    }

    pub fn cartesian(origin: RigidTransform, limits: [(f64, f64); 3]) -> Result<Self> {
        Self::new(JointKind::Cartesian, origin, Vec3::x(), limits.to_vec())
    }

    pub fn dof(&self) -> usize {
        self.kind.dof()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.limits.iter().map(|l| l.0).collect()
    }

    /// Checks coordinate count and limits; `part` names the joint in errors.
    pub fn check(&self, part: &str, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dof() {
            return Err(Error::DofMismatch {
                part: part.to_owned(),
                expected: self.dof(),
                got: theta.len(),
            });
        }
        for (dof, (&value, &(lo, hi))) in theta.iter().zip(&self.limits).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::LimitViolation {
                    part: part.to_owned(),
                    dof,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Clamps coordinates into the limits.
    pub fn clamp(&self, theta: &mut [f64]) {
        for (v, &(lo, hi)) in theta.iter_mut().zip(&self.limits) {
            *v = v.clamp(lo, hi);
        }
    }

    /// Motion in the joint frame, before conjugation by the origin.
    fn local_motion(&self, theta: &[f64]) -> RigidTransform {
        match self.kind {
            JointKind::Revolute => {
                RigidTransform::from_rotation(Rotation::from_axis_angle(&self.axis, theta[0]))
            }
            JointKind::Prismatic => RigidTransform::from_translation(self.axis * theta[0]),
            JointKind::Cylindrical => RigidTransform::new(
                Rotation::from_axis_angle(&self.axis, theta[0]),
                self.axis * theta[1],
            ),
            JointKind::Cartesian => {
                RigidTransform::from_translation(Vec3::new(theta[0], theta[1], theta[2]))
            }
        }
    }

    /// Motion without limit checks; coordinates must have the right count.
    pub fn motion_unchecked(&self, theta: &[f64]) -> RigidTransform {
        self.origin * self.local_motion(theta) * self.origin.inverse()
    }
}

/// Rigid motion of a joint at coordinates `theta`.
pub fn joint_motion(spec: &JointSpec, theta: &[f64]) -> Result<RigidTransform> {
    spec.check("<joint>", theta)?;
    Ok(spec.motion_unchecked(theta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicPart {
    pub id: String,
    pub mesh: TriMesh,
    /// `None` for the root and for parts rigidly fixed to their parent.
    pub joint: Option<JointSpec>,
    pub parent_id: Option<String>,
    /// The part's original parent, expressed in the part's local frame.
    pub source_parent_mesh: Option<TriMesh>,
}

impl KinematicPart {
    pub fn root(id: impl Into<String>, mesh: TriMesh) -> Self {
        Self {
            id: id.into(),
            mesh,
            joint: None,
            parent_id: None,
            source_parent_mesh: None,
        }
    }

    pub fn child(
        id: impl Into<String>,
        mesh: TriMesh,
        parent: impl Into<String>,
        joint: Option<JointSpec>,
    ) -> Self {
        Self {
            id: id.into(),
            mesh,
            joint,
            parent_id: Some(parent.into()),
            source_parent_mesh: None,
        }
    }

    pub fn with_source_parent(mut self, mesh: TriMesh) -> Self {
        self.source_parent_mesh = Some(mesh);
        self
    }

    pub fn dof(&self) -> usize {
        self.joint.as_ref().map_or(0, JointSpec::dof)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeDiagnostic {
    Empty,
    NoRoot,
    MultipleRoots(Vec<String>),
    RootMismatch { declared: String, found: String },
    KeyMismatch { key: String, id: String },
    DanglingParent { part: String, parent: String },
    Cycle(Vec<String>),
    Unreachable(String),
    RootHasJoint(String),
}

impl fmt::Display for TreeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeDiagnostic::Empty => write!(f, "tree has no parts"),
            TreeDiagnostic::NoRoot => write!(f, "no part is without a parent"),
            TreeDiagnostic::MultipleRoots(ids) => {
                write!(f, "multiple parts without a parent: {}", ids.join(", "))
            }
            TreeDiagnostic::RootMismatch { declared, found } => {
                write!(f, "declared root `{declared}` but `{found}` has no parent")
            }
            TreeDiagnostic::KeyMismatch { key, id } => {
                write!(f, "part stored under `{key}` has id `{id}`")
            }
            TreeDiagnostic::DanglingParent { part, parent } => {
                write!(f, "part `{part}` names unknown parent `{parent}`")
            }
            TreeDiagnostic::Cycle(ids) => write!(f, "parent cycle through {}", ids.join(" -> ")),
            TreeDiagnostic::Unreachable(id) => write!(f, "part `{id}` is not reachable from the root"),
            TreeDiagnostic::RootHasJoint(id) => write!(f, "root `{id}` must not carry a joint"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicTree {
    pub parts: BTreeMap<String, KinematicPart>,
    pub root_id: String,
}

impl KinematicTree {
    /// Builds and validates a tree; the root is the part without a parent.
    pub fn new(parts: impl IntoIterator<Item = KinematicPart>) -> Result<Self> {
        let parts: BTreeMap<String, KinematicPart> =
            parts.into_iter().map(|p| (p.id.clone(), p)).collect();
        let root_id = parts
            .values()
            .find(|p| p.parent_id.is_none())
            .map(|p| p.id.clone())
            .unwrap_or_default();
        let tree = Self { parts, root_id };
        validate_tree(&tree).map_err(Error::InvalidTree)?;
        Ok(tree)
    }

    pub fn part(&self, id: &str) -> Result<&KinematicPart> {
        self.parts
            .get(id)
            .ok_or_else(|| Error::UnknownPart(id.to_owned()))
    }

    pub fn root(&self) -> &KinematicPart {
        &self.parts[&self.root_id]
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        self.parts
            .values()
            .filter(|p| p.parent_id.as_deref() == Some(id))
            .map(|p| p.id.as_str())
            .collect()
    }

    /// Parts ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<&str> {
        let mut order = Vec::with_capacity(self.parts.len());
        let mut queue = VecDeque::from([self.root_id.as_str()]);
        while let Some(id) = queue.pop_front() {
            order.push(id);
            queue.extend(self.children(id));
        }
        order
    }

    pub fn non_root_ids(&self) -> Vec<&str> {
        self.topological_order().into_iter().skip(1).collect()
    }

    /// Ids from the root down to `id`, inclusive.
    pub fn chain(&self, id: &str) -> Result<Vec<&str>> {
        let mut chain = vec![self.part(id)?.id.as_str()];
        let mut cur = self.part(id)?;
        while let Some(parent) = &cur.parent_id {
            cur = self.part(parent)?;
            chain.push(cur.id.as_str());
        }
        chain.reverse();
        Ok(chain)
    }

    pub fn total_dof(&self) -> usize {
        self.parts.values().map(KinematicPart::dof).sum()
    }

    /// True when `a` is the parent of `b` or vice versa.
    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        let parent_of = |x: &str| self.parts.get(x).and_then(|p| p.parent_id.as_deref());
        parent_of(a) == Some(b) || parent_of(b) == Some(a)
    }
}

/// Checks the rooted-tree invariants and reports every violation found.
pub fn validate_tree(tree: &KinematicTree) -> std::result::Result<(), Vec<TreeDiagnostic>> {
    let mut diags = Vec::new();
    if tree.parts.is_empty() {
        return Err(vec![TreeDiagnostic::Empty]);
    }
    for (key, p) in &tree.parts {
        if key != &p.id {
            diags.push(TreeDiagnostic::KeyMismatch {
                key: key.clone(),
                id: p.id.clone(),
            });
        }
    }
    let roots: Vec<String> = tree
        .parts
        .values()
        .filter(|p| p.parent_id.is_none())
        .map(|p| p.id.clone())
        .collect();
    match roots.len() {
        0 => diags.push(TreeDiagnostic::NoRoot),
        1 => {
            if roots[0] != tree.root_id {
                diags.push(TreeDiagnostic::RootMismatch {
                    declared: tree.root_id.clone(),
                    found: roots[0].clone(),
                });
            }
            if tree.parts[&roots[0]].joint.is_some() {
                diags.push(TreeDiagnostic::RootHasJoint(roots[0].clone()));
            }
        }
        _ => diags.push(TreeDiagnostic::MultipleRoots(roots.clone())),
    }
    for p in tree.parts.values() {
        if let Some(parent) = &p.parent_id {
            if !tree.parts.contains_key(parent) {
                diags.push(TreeDiagnostic::DanglingParent {
                    part: p.id.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
    // Follow parent links from every part; a revisit within one walk is a cycle.
    let mut reported: BTreeSet<String> = BTreeSet::new();
    let mut reaches_root: BTreeSet<String> = BTreeSet::new();
    for start in tree.parts.keys() {
        let mut path: Vec<String> = Vec::new();
        let mut cur = Some(start.clone());
        while let Some(id) = cur {
            if let Some(pos) = path.iter().position(|x| *x == id) {
                let cycle: Vec<String> = path[pos..].to_vec();
                if cycle.iter().all(|c| !reported.contains(c)) {
                    reported.extend(cycle.iter().cloned());
                    diags.push(TreeDiagnostic::Cycle(cycle));
                }
                break;
            }
            path.push(id.clone());
            match tree.parts.get(&id) {
                Some(p) => match &p.parent_id {
                    Some(parent) => cur = Some(parent.clone()),
                    None => {
                        reaches_root.extend(path.iter().cloned());
                        break;
                    }
                },
                None => break,
            }
        }
    }
    if roots.len() == 1 {
        for id in tree.parts.keys() {
            if !reaches_root.contains(id) && !reported.contains(id) {
                let dangling = diags.iter().any(|d| matches!(d, TreeDiagnostic::DanglingParent { part, .. } if part == id));
                if !dangling {
                    diags.push(TreeDiagnostic::Unreachable(id.clone()));
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Joint coordinates per jointed part.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseVector {
    pub values: BTreeMap<String, Vec<f64>>,
}

impl PoseVector {
    /// Every joint at its lower limit.
    pub fn lower(tree: &KinematicTree) -> Self {
        let values = tree
            .parts
            .values()
            .filter_map(|p| p.joint.as_ref().map(|j| (p.id.clone(), j.lower())))
            .collect();
        Self { values }
    }

    /// Every joint at zero, clamped into its limits.
    pub fn rest(tree: &KinematicTree) -> Self {
        let values = tree
            .parts
            .values()
            .filter_map(|p| {
                p.joint.as_ref().map(|j| {
                    let mut v = vec![0.0; j.dof()];
                    j.clamp(&mut v);
                    (p.id.clone(), v)
                })
            })
            .collect();
        Self { values }
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.values.get(id).map(Vec::as_slice)
    }

    pub fn with(mut self, id: &str, theta: Vec<f64>) -> Self {
        self.values.insert(id.to_owned(), theta);
        self
    }
}

fn part_motion(part: &KinematicPart, pose: &PoseVector) -> Result<RigidTransform> {
    match &part.joint {
        None => Ok(RigidTransform::identity()),
        Some(j) => {
            let theta = pose
                .get(&part.id)
                .ok_or_else(|| Error::MissingJointValue(part.id.clone()))?;
            j.check(&part.id, theta)?;
            Ok(j.motion_unchecked(theta))
        }
    }
}

/// World transform of every part with all placements at identity.
pub fn forward_kinematics(
    tree: &KinematicTree,
    pose: &PoseVector,
) -> Result<BTreeMap<String, RigidTransform>> {
    forward_kinematics_placed(tree, &PlacementSet::new(), pose)
}

/// World transform of every part; parts absent from `placements` sit at
/// identity relative to their parent.
pub fn forward_kinematics_placed(
    tree: &KinematicTree,
    placements: &PlacementSet,
    pose: &PoseVector,
) -> Result<BTreeMap<String, RigidTransform>> {
    let mut world = BTreeMap::new();
    for id in tree.topological_order() {
        let part = &tree.parts[id];
        let base = match &part.parent_id {
            None => placements.get(id).copied().unwrap_or_default(),
            Some(parent) => {
                let p = placements.get(id).copied().unwrap_or_default();
                world[parent.as_str()] * p
            }
        };
        world.insert(id.to_owned(), base * part_motion(part, pose)?);
    }
    Ok(world)
}

/// `n` values evenly spaced over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Joint coordinate snapshots for one joint: each DoF swept over its range
/// with the others at their lower limits. A fixed part yields one empty pose.
pub fn sample_joint_poses(joint: Option<&JointSpec>, snapshots_per_dof: usize) -> Vec<Vec<f64>> {
    let Some(j) = joint else {
        return vec![Vec::new()];
    };
    let mut out = Vec::new();
    for (d, &(lo, hi)) in j.limits.iter().enumerate() {
        for v in linspace(lo, hi, snapshots_per_dof) {
            let mut theta = j.lower();
            theta[d] = v;
            out.push(theta);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseCoupling {
    /// Vary one DoF at a time, others at their lower limit.
    #[default]
    OneAtATime,
    /// Cartesian product over all DoFs; trees with at most 3 DoFs only.
    FullProduct,
}

pub fn sample_pose_grid(tree: &KinematicTree, snapshots_per_dof: usize) -> Result<Vec<PoseVector>> {
    sample_pose_grid_with(tree, snapshots_per_dof, PoseCoupling::OneAtATime)
}

pub fn sample_pose_grid_with(
    tree: &KinematicTree,
    snapshots_per_dof: usize,
    coupling: PoseCoupling,
) -> Result<Vec<PoseVector>> {
    if snapshots_per_dof < 2 {
        return Err(Error::InvalidConfig(format!(
            "snapshots_per_dof must be at least 2, got {snapshots_per_dof}"
        )));
    }
    let base = PoseVector::lower(tree);
    match coupling {
        PoseCoupling::OneAtATime => {
            let mut out = Vec::new();
            for p in tree.parts.values() {
                if p.joint.is_some() {
                    for theta in sample_joint_poses(p.joint.as_ref(), snapshots_per_dof) {
                        out.push(base.clone().with(&p.id, theta));
                    }
                }
            }
            if out.is_empty() {
                out.push(base);
            }
            Ok(out)
        }
        PoseCoupling::FullProduct => {
            let dofs = tree.total_dof();
            if dofs > 3 {
                return Err(Error::InvalidConfig(format!(
                    "full-product pose sampling supports at most 3 DoFs, tree has {dofs}"
                )));
            }
            let mut out = vec![base];
            for p in tree.parts.values() {
                let Some(j) = &p.joint else { continue };
                for (d, &(lo, hi)) in j.limits.iter().enumerate() {
                    let values = linspace(lo, hi, snapshots_per_dof);
                    out = out
                        .into_iter()
                        .flat_map(|pose| {
                            values.iter().map(move |&v| {
                                let mut pose = pose.clone();
                                pose.values.get_mut(&p.id).expect("jointed part")[d] = v;
                                pose
                            })
                        })
                        .collect();
                }
            }
            Ok(out)
        }
    }
}
