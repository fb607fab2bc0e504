//! Scene configuration, end-to-end runs and artifact export.
//!
//! A scene is one JSON document. Paths inside it are relative to the
//! document's directory. Every output goes into a caller-chosen directory:
//! `placements.json`, `report.json`, and for sampler runs `trace.ndjson`,
//! `checkpoints.ndjson` and a `poses/` folder of OBJ snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attachment::{solve_attachment, SolverConfig};
use crate::error::{Error, Result};
use crate::functionality::{
    collision_objective, combine_objectives, pack_objective, reach_objective, trajectory_objective,
    AssembledScene, Objective, PackSpec, ReachTarget, Trajectory,
};
use crate::geometry::{obj_string_with_digits, read_obj, TriMesh};
use crate::kinematics::{
    forward_kinematics_placed, placement_records, placements_from_records, JointKind, JointSpec,
    KinematicPart, KinematicTree, PlacementRecord, PlacementSet, PoseVector, DEFAULT_SNAPSHOTS_PER_DOF, PLACEMENT_DIGITS,
};
use crate::langevin::{evaluate_energies, run_sampler, DofMask, Energies, SamplerConfig, SamplerTrace, SceneInputs};
use crate::liegroup::{RigidTransform, TransformRecord, Vec3};
use crate::metrics::{compute_metrics, MetricsConfig, MetricsReport};
use crate::priors::{priors_from_records, read_exemplars, ExemplarRecord, PinConstraint, DEFAULT_PRIOR_SIGMA};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_EXPORT_FRAMES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub parts: Vec<PartConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorsConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub poses: PoseConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartConfig {
    pub id: String,
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointConfig>,
    /// Mesh of the parent this part was originally attached to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_parent_mesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_placement: Option<TransformRecord>,
    /// Semantic label matched against prior exemplars; defaults to the id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Which placement coordinates the sampler may move; all by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<DofMask>,
}

impl PartConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub kind: JointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<TransformRecord>,
    #[serde(default = "default_axis")]
    pub axis: Vec3,
    pub limits: Vec<[f64; 2]>,
}

fn default_axis() -> Vec3 {
    Vec3::z()
}

impl JointConfig {
    pub fn to_spec(&self) -> Result<JointSpec> {
        let origin = self.origin.as_ref().map(RigidTransform::from).unwrap_or_default();
        JointSpec::new(
            self.kind,
            origin,
            self.axis,
            self.limits.iter().map(|l| (l[0], l[1])).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    pub snapshots_per_dof: usize,
    /// Poses at which objectives are evaluated, as joint values per part;
    /// missing parts stay at rest. Empty means the rest pose alone.
    pub evaluation_poses: Vec<BTreeMap<String, Vec<f64>>>,
    /// Frames in the exported pose sequence.
    pub export_frames: usize,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            snapshots_per_dof: DEFAULT_SNAPSHOTS_PER_DOF,
            evaluation_poses: Vec::new(),
            export_frames: DEFAULT_EXPORT_FRAMES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsConfig {
    #[serde(default)]
    pub pins: Vec<PinConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_file: Option<PathBuf>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    DEFAULT_PRIOR_SIGMA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Reach { targets: Vec<ReachTarget> },
    Pack(PackSpec),
    Trajectory(Trajectory),
    Collision,
    Combined { terms: Vec<WeightedObjective> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedObjective {
    pub weight: f64,
    pub objective: ObjectiveSpec,
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Arc<dyn Objective>> {
        Ok(self.build_boxed()?.into())
    }

    fn build_boxed(&self) -> Result<Box<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::Reach { targets } => Box::new(reach_objective(targets.clone())?),
            ObjectiveSpec::Pack(spec) => Box::new(pack_objective(spec.clone())?),
            ObjectiveSpec::Trajectory(t) => Box::new(trajectory_objective(t.clone())?),
            ObjectiveSpec::Collision => Box::new(collision_objective()),
            ObjectiveSpec::Combined { terms } => Box::new(combine_objectives(
                terms
                    .iter()
                    .map(|t| Ok((t.objective.build_boxed()?, t.weight)))
                    .collect::<Result<Vec<_>>>()?,
            )?),
        })
    }
}

/// A parsed and validated scene with its meshes loaded.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub config: SceneConfig,
    pub base_dir: PathBuf,
    pub tree: Arc<KinematicTree>,
    pub initial: PlacementSet,
    pub pose_set: Vec<PoseVector>,
    pub exemplars: Vec<ExemplarRecord>,
}

impl LoadedScene {
    pub fn assembled(&self, placements: PlacementSet) -> Result<AssembledScene> {
        AssembledScene::new(self.tree.clone(), placements, self.pose_set.clone())
    }

    pub fn objective(&self) -> Result<Option<Arc<dyn Objective>>> {
        self.config.objective.as_ref().map(ObjectiveSpec::build).transpose()
    }

    /// Sampler inputs: attachment problems, objective, pins and priors.
    pub fn inputs(&self, placements: PlacementSet) -> Result<SceneInputs> {
        let mut inputs = SceneInputs::new(self.assembled(placements)?)
            .with_attachment(self.config.poses.snapshots_per_dof, self.config.solver.clone())?;
        if let Some(obj) = self.objective()? {
            inputs = inputs.with_objective(obj);
        }
        for part in &self.config.parts {
            if let Some(mask) = part.mask {
                inputs = inputs.with_mask(part.id.clone(), mask);
            }
        }
        if let Some(p) = &self.config.priors {
            inputs = inputs.with_pins(p.pins.clone());
            let labels: BTreeMap<&str, &str> = self.config.parts.iter().map(|p| (p.id.as_str(), p.label())).collect();
            for prior in priors_from_records(&self.exemplars, p.sigma)? {
                let (parent_label, child_label) = &prior.label_pair;
                for part in self.config.parts.iter().filter(|q| q.label() == child_label) {
                    let Some(parent) = &part.parent else { continue };
                    if labels.get(parent.as_str()) == Some(&parent_label.as_str()) {
                        inputs = inputs.with_prior(part.id.clone(), prior.clone());
                    }
                }
            }
        }
        Ok(inputs)
    }
}

/// Parses a config document. Syntax errors become [`Error::Parse`] with the
/// position; well-formed documents that do not fit the schema become
/// [`Error::Schema`].
pub fn parse_config(text: &str) -> Result<SceneConfig> {
    serde_json::from_str(text).map_err(|e| json_error(&e))
}

fn json_error(e: &serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::Schema(format!("line {}, column {}: {e}", e.line(), e.column())),
        Category::Io => Error::Io(std::io::Error::other(e.to_string())),
        Category::Syntax | Category::Eof => Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_mesh(base: &Path, p: &Path, cache: &mut BTreeMap<PathBuf, TriMesh>) -> Result<TriMesh> {
    let path = resolve(base, p);
    if let Some(m) = cache.get(&path) {
        return Ok(m.clone());
    }
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let m = read_obj(&path)?;
    cache.insert(path, m.clone());
    Ok(m)
}

pub fn load_scene(path: &Path) -> Result<LoadedScene> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_scene_str(&text, &base)
}

/// Like [`load_scene`] for a document already in memory; relative paths
/// resolve against `base_dir`.
pub fn load_scene_str(text: &str, base_dir: &Path) -> Result<LoadedScene> {
    let config = parse_config(text)?;
    if config.version != CONFIG_VERSION {
        return Err(Error::Schema(format!(
            "unsupported config version {}, expected {CONFIG_VERSION}",
            config.version
        )));
    }
    let mut seen = BTreeSet::new();
    for p in &config.parts {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Schema(format!("duplicate part id `{}`", p.id)));
        }
    }
    config.solver.validate()?;
    config.sampler.validate()?;
    let mut cache = BTreeMap::new();
    let mut parts = Vec::with_capacity(config.parts.len());
    let mut initial = PlacementSet::new();
    for pc in &config.parts {
        let mesh = load_mesh(base_dir, &pc.mesh, &mut cache).map_err(|e| e.in_part(&pc.id))?;
        let joint = pc.joint.as_ref().map(JointConfig::to_spec).transpose().map_err(|e| e.in_part(&pc.id))?;
        let part = match &pc.parent {
            None => {
                if joint.is_some() {
                    return Err(Error::Schema(format!("root part `{}` cannot carry a joint", pc.id)));
                }
                KinematicPart::root(pc.id.clone(), mesh)
            }
            Some(parent) => {
                let mut part = KinematicPart::child(pc.id.clone(), mesh, parent.clone(), joint);
                if let Some(src) = &pc.source_parent_mesh {
                    part = part.with_source_parent(load_mesh(base_dir, src, &mut cache).map_err(|e| e.in_part(&pc.id))?);
                }
                initial.insert(
                    pc.id.clone(),
                    pc.initial_placement.as_ref().map(RigidTransform::from).unwrap_or_default(),
                );
                part
            }
        };
        parts.push(part);
    }
    let tree = KinematicTree::new(parts).map_err(|e| match e {
        Error::InvalidTree(d) => Error::Schema(
            d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ),
        other => other,
    })?;
    let pose_set = evaluation_poses(&tree, &config.poses.evaluation_poses)?;
    let exemplars = match config.priors.as_ref().and_then(|p| p.exemplar_file.as_ref()) {
        Some(f) => read_exemplars(&resolve(base_dir, f))?,
        None => Vec::new(),
    };
    if let Some(p) = &config.priors {
        for pin in &p.pins {
            pin.validate()?;
            tree.part(&pin.part_id)?;
        }
    }
    let loaded = LoadedScene {
        config,
        base_dir: base_dir.to_path_buf(),
        tree: Arc::new(tree),
        initial,
        pose_set,
        exemplars,
    };
    loaded.objective()?;
    Ok(loaded)
}

fn evaluation_poses(tree: &KinematicTree, specs: &[BTreeMap<String, Vec<f64>>]) -> Result<Vec<PoseVector>> {
    if specs.is_empty() {
        return Ok(vec![PoseVector::rest(tree)]);
    }
    specs
        .iter()
        .map(|spec| {
            let mut pose = PoseVector::rest(tree);
            for (id, theta) in spec {
                let part = tree.part(id)?;
                let joint = part
                    .joint
                    .as_ref()
                    .ok_or_else(|| Error::Schema(format!("evaluation pose moves joint-free part `{id}`")))?;
                joint.check(id, theta)?;
                pose = pose.with(id, theta.clone());
            }
            Ok(pose)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartResult {
    pub part_id: String,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub mode: String,
    pub placements: Vec<PlacementRecord>,
    pub energies: Energies,
    pub parts: Vec<PartResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub config: SceneConfig,
}

/// Output of a run: the report plus the sampler trace for full runs.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    /// Final placements exactly as written to `placements.json`.
    pub placements: PlacementSet,
    pub trace: Option<SamplerTrace>,
}

/// Placements as they round-trip through the placement file.
pub fn rounded(placements: &PlacementSet) -> Result<PlacementSet> {
    placements_from_records(&placement_records(placements))
}

fn finish(
    loaded: &LoadedScene,
    inputs: &SceneInputs,
    mode: &str,
    placements: PlacementSet,
    parts: Vec<PartResult>,
    mut timings: BTreeMap<String, f64>,
    trace: Option<SamplerTrace>,
) -> Result<RunOutput> {
    let t = Instant::now();
    let placements = rounded(&placements)?;
    let (energies, _) = evaluate_energies(inputs, &placements, 0)?;
    let mut warnings = Vec::new();
    let metrics = match compute_metrics(&loaded.assembled(placements.clone())?, &loaded.config.metrics) {
        Ok(m) => {
            warnings.extend(m.warnings.iter().cloned());
            Some(m)
        }
        Err(e) => {
            warnings.push(format!("metrics skipped: {e}"));
            None
        }
    };
    timings.insert("report".into(), t.elapsed().as_secs_f64());
    Ok(RunOutput {
        report: RunReport {
            version: env!("CARGO_PKG_VERSION").into(),
            seed: loaded.config.seed,
            mode: mode.into(),
            placements: placement_records(&placements),
            energies,
            parts,
            metrics,
            warnings,
            timings,
            config: loaded.config.clone(),
        },
        placements,
        trace,
    })
}

/// Attachment only: every non-root part is solved independently from its
/// initial placement against its parent's mesh.
pub fn run_attach(loaded: &LoadedScene) -> Result<RunOutput> {
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    for id in loaded.tree.non_root_ids() {
        if loaded.tree.parts[id].source_parent_mesh.is_none() {
            return Err(Error::MissingSourceParent(id.to_owned()));
        }
    }
    let inputs = loaded.inputs(loaded.initial.clone())?;
    timings.insert("setup".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let mut placements = loaded.initial.clone();
    let mut parts = Vec::new();
    for (id, problem) in &inputs.problems {
        let r = solve_attachment(problem, &loaded.initial[id], &loaded.config.solver).map_err(|e| e.in_part(id))?;
        parts.push(PartResult {
            part_id: id.clone(),
            energy: r.energy(),
            iterations: r.iterations(),
            converged: r.converged,
        });
        placements.insert(id.clone(), r.placement);
    }
    timings.insert("attach".into(), t.elapsed().as_secs_f64());
    finish(loaded, &inputs, "attach", placements, parts, timings, None)
}

/// Annealed Langevin sampling with the configured objective and priors.
/// The config seed drives the sampler.
pub fn run_full(loaded: &LoadedScene) -> Result<RunOutput> {
    if loaded.config.objective.is_none() {
        return Err(Error::InvalidConfig(
            "the scene has no objective block; use `attach` for attachment-only runs".into(),
        ));
    }
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let inputs = loaded.inputs(loaded.initial.clone())?;
    timings.insert("setup".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let config = SamplerConfig {
        seed: loaded.config.seed,
        ..loaded.config.sampler.clone()
    };
    let result = run_sampler(&inputs, &config)?;
    timings.insert("sample".into(), t.elapsed().as_secs_f64());
    let parts = inputs
        .problems
        .iter()
        .map(|(id, p)| PartResult {
            part_id: id.clone(),
            energy: crate::attachment::eval_ekm_with(p, &result.best[id], inputs.solver.welsch_nu),
            iterations: config.inner_refine_iters,
            converged: false,
        })
        .collect();
    finish(loaded, &inputs, "solve", result.best, parts, timings, Some(result.trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportEntry {
    pub file: String,
    pub pose: PoseVector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub files: Vec<ExportEntry>,
}

/// Writes one OBJ per pose with a group per part, plus `manifest.json`.
/// Coordinates keep as many digits as placement files so exported poses
/// can be checked against forward kinematics.
pub fn export_poses(
    tree: &KinematicTree,
    placements: &PlacementSet,
    poses: &[PoseVector],
    out_dir: &Path,
) -> Result<ExportManifest> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = ExportManifest::default();
    for (i, pose) in poses.iter().enumerate() {
        let world = forward_kinematics_placed(tree, placements, pose)?;
        let meshes: Vec<(String, TriMesh)> = world
            .iter()
            .map(|(id, t)| (id.clone(), tree.parts[id].mesh.transformed(t)))
            .collect();
        let groups: Vec<(&str, &TriMesh)> = meshes.iter().map(|(id, m)| (id.as_str(), m)).collect();
        let file = format!("pose_{i:03}.obj");
        fs::write(out_dir.join(&file), obj_string_with_digits(&groups, PLACEMENT_DIGITS))?;
        manifest.files.push(ExportEntry {
            file,
            pose: pose.clone(),
        });
    }
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// `frames` poses sweeping every joint together from its lower to its upper
/// limits; a single frame is the rest pose.
pub fn pose_sequence(tree: &KinematicTree, frames: usize) -> Vec<PoseVector> {
    if frames <= 1 {
        return vec![PoseVector::rest(tree)];
    }
    (0..frames)
        .map(|f| {
            let s = f as f64 / (frames - 1) as f64;
            let mut pose = PoseVector::rest(tree);
            for (id, part) in &tree.parts {
                if let Some(j) = &part.joint {
                    let theta = j.limits.iter().map(|(lo, hi)| lo + s * (hi - lo)).collect();
                    pose = pose.with(id, theta);
                }
            }
            pose
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_placements(path: &Path, placements: &PlacementSet) -> Result<()> {
    write_json(path, &placement_records(placements))
}

pub fn read_placements(path: &Path) -> Result<PlacementSet> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let records: Vec<PlacementRecord> = serde_json::from_str(&text).map_err(|e| json_error(&e))?;
    placements_from_records(&records)
}

/// Writes the placements, report and (for sampler runs) trace, checkpoints
/// and pose exports into `out_dir`.
pub fn write_run(loaded: &LoadedScene, output: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_placements(&out_dir.join("placements.json"), &output.placements)?;
    write_json(&out_dir.join("report.json"), &output.report)?;
    if let Some(trace) = &output.trace {
        trace.write_ndjson(fs::File::create(out_dir.join("trace.ndjson"))?)?;
        trace.write_checkpoints(fs::File::create(out_dir.join("checkpoints.ndjson"))?)?;
        let poses = pose_sequence(&loaded.tree, loaded.config.poses.export_frames);
        export_poses(&loaded.tree, &output.placements, &poses, &out_dir.join("poses"))?;
    }
    Ok(())
}

/// Writes every mesh of `tree` (and each part's source-parent mesh) as OBJ
/// into `dir` and returns a config describing the tree with the given
/// initial placements. Objective, priors and solver settings are left at
/// their defaults for the caller to fill in.
pub fn bundle_tree(tree: &KinematicTree, placements: &PlacementSet, dir: &Path) -> Result<SceneConfig> {
    fs::create_dir_all(dir)?;
    let mut parts = Vec::with_capacity(tree.parts.len());
    let mut ids: Vec<&str> = vec![tree.root_id.as_str()];
    ids.extend(tree.non_root_ids());
    for id in ids {
        let part = &tree.parts[id];
        let mesh = PathBuf::from(format!("{id}.obj"));
        fs::write(dir.join(&mesh), obj_string_with_digits(&[(id, &part.mesh)], PLACEMENT_DIGITS))?;
        let source_parent_mesh = match &part.source_parent_mesh {
            Some(m) => {
                let p = PathBuf::from(format!("{id}.source_parent.obj"));
                fs::write(dir.join(&p), obj_string_with_digits(&[("source_parent", m)], PLACEMENT_DIGITS))?;
                Some(p)
            }
            None => None,
        };
        parts.push(PartConfig {
            id: id.to_owned(),
            mesh,
            parent: part.parent_id.clone(),
            joint: part.joint.as_ref().map(|j| JointConfig {
                kind: j.kind,
                origin: Some(TransformRecord::from(&j.origin)),
                axis: j.axis,
                limits: j.limits.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            }),
            source_parent_mesh,
            initial_placement: placements.get(id).map(TransformRecord::from),
            label: None,
            mask: None,
        });
    }
    Ok(SceneConfig {
        version: CONFIG_VERSION,
        seed: 0,
        parts,
        objective: None,
        priors: None,
        solver: SolverConfig::default(),
        sampler: SamplerConfig::default(),
        poses: PoseConfig::default(),
        metrics: MetricsConfig::default(),
    })
}

/// Process exit code for an error: 2 validation, 3 solver, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err.root_cause() {
        Error::Io(_) | Error::MissingFile(_) => 4,
        Error::AngleNearPi { .. }
        | Error::SingularSystem
        | Error::AllWeightsZero
        | Error::NoDofOnChain(_)
        | Error::NoGroundContact => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::obj_string;

    fn write(dir: &Path, name: &str, mesh: &TriMesh) {
        fs::write(dir.join(name), obj_string(&[(name, mesh)])).unwrap();
    }

    /// Block on a corner, the block's mesh and source parent on disk.
    fn corner_files(dir: &Path) {
        let tree = crate::demo::corner_scene(2);
        write(dir, "corner.obj", &tree.parts["corner"].mesh);
        write(dir, "block.obj", &tree.parts["block"].mesh);
    }

    fn corner_config(extra: &str) -> String {
        format!(
            r#"{{
  "version": 1,
  "seed": 3,
  "parts": [
    {{"id": "corner", "mesh": "corner.obj"}},
    {{"id": "block", "mesh": "block.obj", "parent": "corner", "source_parent_mesh": "corner.obj",
      "joint": {{"kind": "revolute", "origin": {{"rotation_axis_angle": [0, 0, 0], "translation": [-0.55, -0.55, 0.25]}},
                "axis": [0, 0, 1], "limits": [[0, 0.785398163397]]}}}}
  ]{extra}
}}"#
        )
    }

    #[test]
    fn minimal_scene_loads() {
        let dir = tempfile::tempdir().unwrap();
        corner_files(dir.path());
        fs::write(dir.path().join("scene.json"), corner_config("")).unwrap();
        let s = load_scene(&dir.path().join("scene.json")).unwrap();
        assert_eq!(s.tree.parts.len(), 2);
        assert_eq!(s.pose_set, vec![PoseVector::rest(&s.tree)]);
        assert_eq!(s.initial["block"], RigidTransform::identity());
    }

    #[test]
    fn cycles_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        corner_files(dir.path());
        let text = r#"{"version": 1, "parts": [
            {"id": "base", "mesh": "corner.obj"},
            {"id": "a", "mesh": "block.obj", "parent": "b"},
            {"id": "b", "mesh": "block.obj", "parent": "a"}]}"#;
        match load_scene_str(text, dir.path()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("cycle") && msg.contains('a') && msg.contains('b'), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_meshes_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_scene_str(r#"{"version": 1, "parts": [{"id": "a", "mesh": "nope.obj"}]}"#, dir.path()).unwrap_err();
        match err.root_cause() {
            Error::MissingFile(p) => assert!(p.ends_with("nope.obj")),
            other => panic!("{other:?}"),
        }
        assert_eq!(exit_code(&err), 4);
    }

    #[test]
    fn syntax_and_schema_errors_differ() {
        let dir = tempfile::tempdir().unwrap();
        match load_scene_str("{\n  \"version\": 1,\n  \"parts\": [\n}", dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let typo = r#"{"version": 1, "parts": [], "solver": {"rhoo": 3}}"#;
        let err = load_scene_str(typo, dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("rhoo")));
        assert_eq!(exit_code(&err), 2);
        let version = r#"{"version": 7, "parts": []}"#;
        assert!(matches!(load_scene_str(version, dir.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn objectives_parse_by_kind() {
        let spec: ObjectiveSpec = serde_json::from_str(
            r#"{"kind": "combined", "terms": [
                {"weight": 1, "objective": {"kind": "pack", "box_center": [0, 0, 0], "box_half_extent": 1}},
                {"weight": 2, "objective": {"kind": "collision"}}]}"#,
        )
        .unwrap();
        assert!(spec.build().is_ok());
        let bad: std::result::Result<ObjectiveSpec, _> =
            serde_json::from_str(r#"{"kind": "pack", "box_center": [0, 0, 0], "box_half_extent": 1, "oops": 1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn attach_run_reaches_self_attachment() {
        let dir = tempfile::tempdir().unwrap();
        corner_files(dir.path());
        let s = load_scene_str(&corner_config(""), dir.path()).unwrap();
        let out = run_attach(&s).unwrap();
        let samples = crate::geometry::vdf_source_samples(&s.tree.parts["block"].mesh).len();
        assert!(out.report.energies.attachment < 1e-6 * samples as f64);
        let outdir = dir.path().join("out");
        write_run(&s, &out, &outdir).unwrap();
        let back = read_placements(&outdir.join("placements.json")).unwrap();
        assert_eq!(back, out.placements);
        // Energies recompute from the written placements.
        let inputs = s.inputs(s.initial.clone()).unwrap();
        let (e, _) = evaluate_energies(&inputs, &back, 0).unwrap();
        assert!((e.attachment - out.report.energies.attachment).abs() < 1e-9);
    }

    #[test]
    fn full_run_needs_an_objective() {
        let dir = tempfile::tempdir().unwrap();
        corner_files(dir.path());
        let s = load_scene_str(&corner_config(""), dir.path()).unwrap();
        let err = run_full(&s).unwrap_err();
        assert!(matches!(&err, Error::InvalidConfig(m) if m.contains("attach")));
    }

    #[test]
    fn hinge_export_matches_forward_kinematics() {
        let dir = tempfile::tempdir().unwrap();
        let tree = crate::demo::flap_scene(1);
        let placements = PlacementSet::from([("door".to_owned(), RigidTransform::from_translation(Vec3::new(0.0, -0.01, 0.0)))]);
        let poses = pose_sequence(&tree, 5);
        let m = export_poses(&tree, &placements, &poses, dir.path()).unwrap();
        let mut listed: Vec<String> = m.files.iter().map(|e| e.file.clone()).collect();
        listed.push("manifest.json".into());
        listed.sort();
        let mut on_disk: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        on_disk.sort();
        assert_eq!(listed, on_disk);
        for (entry, pose) in m.files.iter().zip(&poses) {
            let mesh = read_obj(&dir.path().join(&entry.file)).unwrap();
            let world = forward_kinematics_placed(&tree, &placements, pose).unwrap();
            let expected: Vec<Vec3> = world
                .iter()
                .flat_map(|(id, t)| tree.parts[id].mesh.vertices().iter().map(move |v| t.apply_point(v)))
                .collect();
            assert_eq!(mesh.vertices().len(), expected.len());
            for (a, b) in mesh.vertices().iter().zip(&expected) {
                assert!((a - b).abs().max() < 1e-9 * b.abs().max().max(1.0), "{a:?} {b:?}");
            }
        }
        let rest = export_poses(&tree, &placements, &pose_sequence(&tree, 1), &dir.path().join("rest")).unwrap();
        assert_eq!(rest.files.len(), 1);
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::AllWeightsZero), 3);
        assert_eq!(exit_code(&Error::Schema("x".into()).in_part("a")), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 4);
    }
}
