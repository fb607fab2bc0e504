//! Annealed Langevin sampling over the placements of every non-root part.
//!
//! The target density is `exp(-(E_km / lambda + E_func + priors + pins))`,
//! evaluated after a few attachment iterations from the given placements.
//! Its score is estimated by self-normalized importance sampling over
//! candidates drawn from the transition kernel: a Gaussian on translations
//! and an isotropic Gaussian on rotations, applied by left composition.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attachment::{build_problem, eval_ekm_with, solve_attachment, AttachmentProblem, SolverConfig};
use crate::error::{Error, Result};
use crate::functionality::{part_bounds, AssembledScene, Objective};
use crate::geometry::Aabb;
use crate::kinematics::{placement_records, PlacementRecord, PlacementSet, PoseVector};
use crate::liegroup::{
    igso3_log_density_grad, so3_exp, Igso3Params, Igso3Sampler, RigidTransform, Rotation, Vec3,
};
use crate::priors::{pin_energy, prior_energy, PinConstraint, TransformPrior};

/// Largest number of score candidates; each gets its own RNG stream.
pub const MAX_SCORE_SAMPLES: usize = 1 << 16;
/// Weights below this fraction of the largest are dropped from the score.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Rotations drifting further than this from orthonormal are projected back.
pub const ORTHO_DRIFT: f64 = 1e-10;
/// Kernel scales below this are treated as no rotation at all.
const MIN_ROT_SCALE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub total_steps: usize,
    pub schedule: ScheduleKind,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub score_samples: usize,
    /// Temperature of the attachment energy.
    pub lambda: f64,
    /// Translation kernel scale. Defaults to a tenth of the scene diagonal.
    pub trans_noise: Option<f64>,
    /// Rotation kernel scale in radians.
    pub rot_noise: f64,
    pub seed: u64,
    /// Attachment iterations run inside every density evaluation.
    pub inner_refine_iters: usize,
    /// Continue the chain from the refined placements instead of the raw
    /// ones; refinement otherwise only informs the density.
    pub refine_chain: bool,
    pub checkpoint_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            total_steps: 300,
            schedule: ScheduleKind::Geometric,
            alpha_start: 0.1,
            alpha_end: 1e-3,
            score_samples: 30,
            lambda: 1.0,
            trans_noise: None,
            rot_noise: 0.3,
            seed: 0,
            inner_refine_iters: 3,
            refine_chain: false,
            checkpoint_every: 25,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.total_steps == 0 {
            return bad("sampler total_steps must be at least 1".into());
        }
        if !(self.alpha_end > 0.0 && self.alpha_start >= self.alpha_end && self.alpha_start.is_finite()) {
            return bad(format!(
                "step sizes must satisfy alpha_start >= alpha_end > 0, got {} and {}",
                self.alpha_start, self.alpha_end
            ));
        }
        if self.score_samples == 0 || self.score_samples > MAX_SCORE_SAMPLES {
            return bad(format!(
                "score_samples must lie in [1, {MAX_SCORE_SAMPLES}], got {}",
                self.score_samples
            ));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(t) = self.trans_noise {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("trans_noise must be positive, got {t}"));
            }
        }
        if !(self.rot_noise > 0.0 && self.rot_noise.is_finite()) {
            return bad(format!("rot_noise must be positive, got {}", self.rot_noise));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Vec<f64>> {
        anneal_schedule(self.schedule, self.alpha_start, self.alpha_end, self.total_steps)
    }
}

/// Step sizes from `alpha_start` down to `alpha_end` over `steps` entries.
pub fn anneal_schedule(kind: ScheduleKind, alpha_start: f64, alpha_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(alpha_end > 0.0 && alpha_start >= alpha_end) {
        return Err(Error::InvalidConfig(format!(
            "schedule needs alpha_start >= alpha_end > 0, got {alpha_start} and {alpha_end}"
        )));
    }
    Ok(match kind {
        ScheduleKind::Geometric => (0..steps)
            .map(|k| {
                if steps == 1 {
                    alpha_start
                } else {
                    alpha_start * (alpha_end / alpha_start).powf(k as f64 / (steps - 1) as f64)
                }
            })
            .collect(),
    })
}

/// Which coordinates of a part's placement the sampler may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofMask {
    pub translation: [bool; 3],
    pub rotation: bool,
}

impl Default for DofMask {
    fn default() -> Self {
        Self {
            translation: [true; 3],
            rotation: true,
        }
    }
}

impl DofMask {
    /// Keeps the part where it is.
    pub fn fixed() -> Self {
        Self {
            translation: [false; 3],
            rotation: false,
        }
    }

    pub fn translation_only() -> Self {
        Self {
            rotation: false,
            ..Self::default()
        }
    }

    fn apply(&self, mut v: Vec3) -> Vec3 {
        for k in 0..3 {
            if !self.translation[k] {
                v[k] = 0.0;
            }
        }
        v
    }
}

/// Everything the target density depends on.
#[derive(Clone)]
pub struct SceneInputs {
    /// Tree, initial placements and the poses objectives are evaluated at.
    pub scene: AssembledScene,
    /// Attachment problem per part; parts without one contribute no `E_km`.
    pub problems: BTreeMap<String, Arc<AttachmentProblem>>,
    pub solver: SolverConfig,
    pub objective: Option<Arc<dyn Objective>>,
    pub pins: Vec<PinConstraint>,
    /// Transform prior on the placement of the keyed part.
    pub priors: BTreeMap<String, TransformPrior>,
    /// Parts listed here move only along the unmasked coordinates and skip
    /// the inner attachment refinement.
    pub masks: BTreeMap<String, DofMask>,
}

impl SceneInputs {
    pub fn new(scene: AssembledScene) -> Self {
        Self {
            scene,
            problems: BTreeMap::new(),
            solver: SolverConfig::default(),
            objective: None,
            pins: Vec::new(),
            priors: BTreeMap::new(),
            masks: BTreeMap::new(),
        }
    }

    /// Builds an attachment problem for every part that has a source parent.
    pub fn with_attachment(mut self, snapshots_per_dof: usize, solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        let tree = self.scene.tree.clone();
        for id in tree.non_root_ids() {
            let part = &tree.parts[id];
            if part.source_parent_mesh.is_none() {
                continue;
            }
            let parent = part.parent_id.as_deref().expect("non-root parts have parents");
            let problem = build_problem(part, &tree, &tree.parts[parent].mesh, snapshots_per_dof)
                .map_err(|e| e.in_part(id))?;
            self.problems.insert(id.to_owned(), Arc::new(problem));
        }
        self.solver = solver;
        Ok(self)
    }

    pub fn with_objective(mut self, objective: Arc<dyn Objective>) -> Self {
        self.objective = Some(objective);
        self
    }

    pub fn with_pins(mut self, pins: Vec<PinConstraint>) -> Self {
        self.pins = pins;
        self
    }

    pub fn with_prior(mut self, part_id: impl Into<String>, prior: TransformPrior) -> Self {
        self.priors.insert(part_id.into(), prior);
        self
    }

    pub fn with_mask(mut self, part_id: impl Into<String>, mask: DofMask) -> Self {
        self.masks.insert(part_id.into(), mask);
        self
    }

    pub fn initial_placements(&self) -> &PlacementSet {
        &self.scene.placements
    }

    /// Diagonal of the rest-pose bounds of the scene at its initial placements.
    pub fn scene_diagonal(&self) -> Result<f64> {
        let rest = PoseVector::rest(&self.scene.tree);
        let b = part_bounds(&self.scene, &rest)?
            .values()
            .fold(Aabb::empty(), |acc, b| acc.union(b));
        Ok(b.diagonal())
    }

    fn mask(&self, id: &str) -> DofMask {
        self.masks.get(id).copied().unwrap_or_default()
    }
}

/// Energy terms of one configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub attachment: f64,
    pub functionality: f64,
    pub prior: f64,
    pub pin: f64,
}

impl Energies {
    /// Negative log density: `E_km / lambda + E_func + prior + pin`.
    pub fn total(&self, lambda: f64) -> f64 {
        self.attachment / lambda + self.functionality + self.prior + self.pin
    }
}

/// Refines `placements` with `inner_refine_iters` attachment iterations per
/// part, then evaluates every energy term on the refined configuration.
pub fn evaluate_energies(
    inputs: &SceneInputs,
    placements: &PlacementSet,
    inner_refine_iters: usize,
) -> Result<(Energies, PlacementSet)> {
    let mut refined = placements.clone();
    let mut e = Energies::default();
    let solver = SolverConfig {
        max_outer_iters: inner_refine_iters,
        ..inputs.solver.clone()
    };
    for (id, problem) in &inputs.problems {
        let start = *placements
            .get(id)
            .ok_or_else(|| Error::InvalidConfig(format!("no placement for part `{id}`")))?;
        let placed = if inner_refine_iters > 0 && !inputs.masks.contains_key(id) {
            solve_attachment(problem, &start, &solver)
                .map_err(|err| err.in_part(id))?
                .placement
        } else {
            start
        };
        e.attachment += eval_ekm_with(problem, &placed, solver.welsch_nu);
        refined.insert(id.clone(), placed);
    }
    for (id, prior) in &inputs.priors {
        let p = refined
            .get(id)
            .ok_or_else(|| Error::InvalidConfig(format!("prior on unplaced part `{id}`")))?;
        e.prior += prior_energy(prior, p)?;
    }
    let scene = inputs.scene.with_placements(refined.clone())?;
    if !inputs.pins.is_empty() {
        let world = scene.world_transforms(&PoseVector::rest(&scene.tree))?;
        for pin in &inputs.pins {
            let t = world.get(&pin.part_id).ok_or_else(|| Error::UnknownPart(pin.part_id.clone()))?;
            e.pin += pin_energy(pin, t, &scene.tree.parts[&pin.part_id].mesh);
        }
    }
    if let Some(obj) = &inputs.objective {
        e.functionality = obj.evaluate(&scene)?;
    }
    Ok((e, refined))
}

/// `-(E_km / lambda + E_func + prior + pin)` after inner refinement, and the
/// refined placements.
pub fn target_log_density(
    inputs: &SceneInputs,
    placements: &PlacementSet,
    lambda: f64,
    inner_refine_iters: usize,
) -> Result<(f64, PlacementSet)> {
    let (e, refined) = evaluate_energies(inputs, placements, inner_refine_iters)?;
    Ok((-e.total(lambda), refined))
}

/// Transition kernel at one step size.
#[derive(Clone, Debug)]
pub struct ProposalKernel {
    /// Translation standard deviation, `sqrt(alpha) * trans_noise`.
    pub trans_sigma: f64,
    rotation: Option<Igso3Sampler>,
}

impl ProposalKernel {
    pub fn new(alpha: f64, trans_noise: f64, rot_noise: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {alpha}")));
        }
        let scale = alpha.sqrt() * rot_noise;
        let rotation = if scale > MIN_ROT_SCALE {
            Some(Igso3Sampler::new(Igso3Params::new(scale))?)
        } else {
            None
        };
        Ok(Self {
            trans_sigma: alpha.sqrt() * trans_noise,
            rotation,
        })
    }

    pub fn rot_params(&self) -> Option<&Igso3Params> {
        self.rotation.as_ref().map(|s| s.params())
    }

    /// Perturbs every part independently, in part-id order.
    pub fn propose<R: Rng + ?Sized>(
        &self,
        current: &PlacementSet,
        masks: &BTreeMap<String, DofMask>,
        rng: &mut R,
    ) -> PlacementSet {
        current
            .iter()
            .map(|(id, p)| {
                let mask = masks.get(id).copied().unwrap_or_default();
                let noise = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let translation = p.translation + mask.apply(noise * self.trans_sigma);
                let rotation = match &self.rotation {
                    Some(s) => {
                        let r = s.sample(rng);
                        if mask.rotation {
                            r * p.rotation
                        } else {
                            p.rotation
                        }
                    }
                    None => p.rotation,
                };
                (id.clone(), RigidTransform::new(rotation, translation))
            })
            .collect()
    }
}

/// One draw from the transition kernel around `current`.
pub fn propose<R: Rng + ?Sized>(
    current: &PlacementSet,
    alpha: f64,
    trans_noise: f64,
    rot_noise: f64,
    rng: &mut R,
) -> Result<PlacementSet> {
    Ok(ProposalKernel::new(alpha, trans_noise, rot_noise)?.propose(current, &BTreeMap::new(), rng))
}

/// Per-part score: translational and rotational (left-perturbation) parts.
pub type Score = BTreeMap<String, (Vec3, Vec3)>;

#[derive(Clone, Debug)]
pub struct Candidate {
    pub placements: PlacementSet,
    pub refined: PlacementSet,
    pub energies: Energies,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct ScoreEstimate {
    pub score: Score,
    pub candidates: Vec<Candidate>,
    /// Normalized weights, zero for dropped candidates.
    pub weights: Vec<f64>,
}

/// Deterministic RNG for `(seed, step, index)`. Each pair gets its own
/// ChaCha stream, so parallel and serial evaluation draw the same numbers.
pub fn substream(seed: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step.wrapping_mul(MAX_SCORE_SAMPLES as u64).wrapping_add(index));
    rng
}

/// Importance-sampled score of the smoothed target at `current`.
///
/// Candidates come from the kernel around `current`; each is weighted by its
/// target density (shifted by the maximum log density), and the score is the
/// weighted mean of the kernel's log-density gradient with respect to
/// `current`.
pub fn estimate_score(
    inputs: &SceneInputs,
    current: &PlacementSet,
    kernel: &ProposalKernel,
    config: &SamplerConfig,
    step: u64,
) -> Result<ScoreEstimate> {
    if config.score_samples == 0 {
        return Err(Error::InvalidConfig("score_samples must be at least 1".into()));
    }
    let candidates = (0..config.score_samples as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(config.seed, step, idx);
            let placements = kernel.propose(current, &inputs.masks, &mut rng);
            let (energies, refined) = evaluate_energies(inputs, &placements, config.inner_refine_iters)?;
            Ok(Candidate {
                energy: energies.total(config.lambda),
                placements,
                refined,
                energies,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = density_weights(&candidates.iter().map(|c| -c.energy).collect::<Vec<_>>())?;
    let mut score: Score = current.keys().map(|id| (id.clone(), (Vec3::zeros(), Vec3::zeros()))).collect();
    let var = kernel.trans_sigma * kernel.trans_sigma;
    for (c, w) in candidates.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        for (id, p) in current {
            let q = &c.placements[id];
            let entry = score.get_mut(id).expect("score covers current");
            if var > 0.0 {
                entry.0 += *w * (q.translation - p.translation) / var;
            }
            if let Some(params) = kernel.rot_params() {
                if inputs.mask(id).rotation {
                    entry.1 += *w * igso3_log_density_grad(&p.rotation, &q.rotation, params)?;
                }
            }
        }
    }
    Ok(ScoreEstimate {
        score,
        candidates,
        weights,
    })
}

/// Max-shifted, normalized weights with tiny ones set to zero.
fn density_weights(log_densities: &[f64]) -> Result<Vec<f64>> {
    let max = log_densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut w: Vec<f64> = log_densities
        .iter()
        .map(|l| {
            let x = (l - max).exp();
            if x < WEIGHT_FLOOR || x.is_nan() {
                0.0
            } else {
                x
            }
        })
        .collect();
    let sum: f64 = w.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    for x in &mut w {
        *x /= sum;
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub alpha: f64,
    pub current_energy: f64,
    pub best_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub placements: Vec<PlacementRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerTrace {
    pub records: Vec<TraceRecord>,
    pub checkpoints: Vec<Checkpoint>,
}

impl SamplerTrace {
    /// One JSON object per step, in order.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Io(e.into()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// One JSON object per checkpoint, in order.
    pub fn write_checkpoints<W: Write>(&self, mut out: W) -> Result<()> {
        for c in &self.checkpoints {
            serde_json::to_writer(&mut out, c).map_err(|e| Error::Io(e.into()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn best_energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.best_energy)
    }
}

#[derive(Clone, Debug)]
pub struct SamplerResult {
    /// Refined placements of the lowest-energy configuration evaluated.
    pub best: PlacementSet,
    pub best_energies: Energies,
    pub best_energy: f64,
    pub trace: SamplerTrace,
}

/// Runs the annealed chain and returns the best configuration seen, counting
/// the chain states and every score candidate.
///
/// Each step moves translations by `(alpha / 2) * trans_noise^2 * score +
/// sqrt(alpha) * trans_noise * noise` and rotations by left composition with
/// `Exp((alpha / 2) * rot_noise^2 * score + sqrt(alpha) * rot_noise * noise)`.
/// The squared kernel scales precondition the score so that the drift is a
/// fraction of the candidate spread whatever the scene's units.
pub fn run_sampler(inputs: &SceneInputs, config: &SamplerConfig) -> Result<SamplerResult> {
    config.validate()?;
    let trans_noise = match config.trans_noise {
        Some(t) => t,
        None => 0.1 * inputs.scene_diagonal()?,
    };
    if !(trans_noise > 0.0) {
        return Err(Error::InvalidConfig("scene has zero extent; set trans_noise".into()));
    }
    let schedule = config.schedule()?;
    let steps = schedule.len() as u64;

    let mut rng = substream(config.seed, steps, 0);
    let init_kernel = ProposalKernel::new(1.0, trans_noise, config.rot_noise)?;
    let mut current = init_kernel.propose(inputs.initial_placements(), &inputs.masks, &mut rng);
    for id in inputs.scene.tree.non_root_ids() {
        if !current.contains_key(id) {
            return Err(Error::InvalidConfig(format!("no initial placement for part `{id}`")));
        }
    }

    let mut best: Option<(f64, Energies, PlacementSet)> = None;
    let mut trace = SamplerTrace::default();
    let consider = |best: &mut Option<(f64, Energies, PlacementSet)>, energy: f64, energies: &Energies, refined: &PlacementSet| {
        if best.as_ref().is_none_or(|(b, _, _)| energy < *b) {
            *best = Some((energy, *energies, refined.clone()));
        }
    };

    for (s, &alpha) in schedule.iter().enumerate() {
        let kernel = ProposalKernel::new(alpha, trans_noise, config.rot_noise)?;
        let (now, refined) = evaluate_energies(inputs, &current, config.inner_refine_iters)?;
        let current_energy = now.total(config.lambda);
        consider(&mut best, current_energy, &now, &refined);
        if config.refine_chain {
            current = refined;
        }
        let est = estimate_score(inputs, &current, &kernel, config, s as u64)?;
        for c in &est.candidates {
            consider(&mut best, c.energy, &c.energies, &c.refined);
        }
        let best_energy = best.as_ref().expect("at least one evaluation").0;
        trace.records.push(TraceRecord {
            step: s,
            alpha,
            current_energy,
            best_energy,
        });
        if s % config.checkpoint_every == 0 {
            trace.checkpoints.push(Checkpoint {
                step: s,
                placements: placement_records(&current),
            });
        }

        let mut rng = substream(config.seed, s as u64, MAX_SCORE_SAMPLES as u64 - 1);
        current = current
            .iter()
            .map(|(id, p)| {
                let mask = inputs.mask(id);
                let (st, sr) = est.score[id];
                let drift = 0.5 * alpha * trans_noise * trans_noise * st;
                let noise = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let rot_noise = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let translation = p.translation + mask.apply(drift + alpha.sqrt() * trans_noise * noise);
                let rotation = if mask.rotation {
                    let tangent = 0.5 * alpha * config.rot_noise * config.rot_noise * sr
                        + alpha.sqrt() * config.rot_noise * rot_noise;
                    let r: Rotation = so3_exp(&tangent) * p.rotation;
                    if r.orthonormality_error() > ORTHO_DRIFT {
                        r.orthonormalized()
                    } else {
                        r
                    }
                } else {
                    p.rotation
                };
                (id.clone(), RigidTransform::new(rotation, translation))
            })
            .collect();
    }

    let (best_energy, best_energies, best) = best.expect("at least one step ran");
    Ok(SamplerResult {
        best,
        best_energies,
        best_energy,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;
    use crate::kinematics::{KinematicPart, KinematicTree};

    fn free_part_scene() -> AssembledScene {
        let ground = cuboid(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0), 1);
        let block = cuboid(Vec3::new(-0.1, -0.1, -0.1), Vec3::new(0.1, 0.1, 0.1), 1);
        let tree = KinematicTree::new([
            KinematicPart::root("ground", ground),
            KinematicPart::child("block", block, "ground", None),
        ])
        .unwrap();
        let placements = PlacementSet::from([("block".to_owned(), RigidTransform::identity())]);
        let rest = PoseVector::rest(&tree);
        AssembledScene::new(Arc::new(tree), placements, vec![rest]).unwrap()
    }

    fn x_of(scene: &AssembledScene) -> f64 {
        scene.placements["block"].translation.x
    }

    /// One part sliding along x under `(x - 2)^2 / 2`.
    fn surrogate() -> SceneInputs {
        let mask = DofMask {
            translation: [true, false, false],
            rotation: false,
        };
        let energy = |s: &AssembledScene| Ok(0.5 * (x_of(s) - 2.0).powi(2));
        SceneInputs::new(free_part_scene())
            .with_objective(Arc::new(energy))
            .with_mask("block", mask)
    }

    fn surrogate_score(samples: usize, seed: u64) -> f64 {
        let inputs = surrogate();
        let config = SamplerConfig {
            score_samples: samples,
            seed,
            ..SamplerConfig::default()
        };
        let kernel = ProposalKernel::new(1.0, 1.0, 0.3).unwrap();
        let est = estimate_score(&inputs, inputs.initial_placements(), &kernel, &config, 0).unwrap();
        est.score["block"].0.x
    }

    #[test]
    fn schedule_cases() {
        let g = ScheduleKind::Geometric;
        assert_eq!(anneal_schedule(g, 0.5, 0.01, 1).unwrap(), vec![0.5]);
        assert!(anneal_schedule(g, 0.2, 0.2, 4).unwrap().iter().all(|&a| a == 0.2));
        let s = anneal_schedule(g, 1.0, 0.01, 3).unwrap();
        for (a, b) in s.iter().zip([1.0, 0.1, 0.01]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(anneal_schedule(g, 0.01, 1.0, 3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let zero = SamplerConfig {
            total_steps: 0,
            ..SamplerConfig::default()
        };
        assert!(matches!(zero.validate(), Err(Error::InvalidConfig(_))));
        let no_samples = SamplerConfig {
            score_samples: 0,
            ..SamplerConfig::default()
        };
        assert!(no_samples.validate().is_err());
    }

    #[test]
    fn infinite_temperature_leaves_functionality() {
        let inputs = surrogate();
        let p = inputs.initial_placements().clone();
        let (ld, _) = target_log_density(&inputs, &p, f64::INFINITY, 0).unwrap();
        assert!((ld + 2.0).abs() < 1e-9);
    }

    #[test]
    fn satisfied_scene_has_zero_log_density() {
        let inputs = surrogate();
        let mut p = inputs.initial_placements().clone();
        p.insert("block".into(), RigidTransform::from_translation(Vec3::new(2.0, 0.0, 0.0)));
        let (ld, _) = target_log_density(&inputs, &p, 1.0, 3).unwrap();
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn zero_refinement_matches_direct_evaluation() {
        let tree = crate::demo::corner_scene(2);
        let placements = PlacementSet::from([(
            "block".to_owned(),
            RigidTransform::from_axis_angle_translation(Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.02, 0.0, 0.01)),
        )]);
        let scene = AssembledScene::new(Arc::new(tree), placements.clone(), vec![]).unwrap();
        let inputs = SceneInputs::new(scene).with_attachment(3, SolverConfig::default()).unwrap();
        let (ld, refined) = target_log_density(&inputs, &placements, 2.0, 0).unwrap();
        let direct = eval_ekm_with(&inputs.problems["block"], &placements["block"], inputs.solver.welsch_nu);
        assert!((ld + direct / 2.0).abs() < 1e-12);
        assert_eq!(refined, placements);
        let (ld3, refined3) = target_log_density(&inputs, &placements, 2.0, 3).unwrap();
        assert!(ld3 >= ld);
        assert_ne!(refined3, placements);
    }

    #[test]
    fn vanishing_step_keeps_the_placement() {
        let start = PlacementSet::from([(
            "a".to_owned(),
            RigidTransform::from_axis_angle_translation(Vec3::new(0.3, 0.1, 0.0), Vec3::new(1.0, 2.0, 3.0)),
        )]);
        let mut rng = substream(1, 0, 0);
        let p = propose(&start, 1e-24, 0.1, 0.3, &mut rng).unwrap();
        let (a, b) = (&start["a"], &p["a"]);
        assert!((a.translation - b.translation).norm() < 1e-9);
        assert!((a.rotation.matrix() - b.rotation.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn proposal_covariance_matches_kernel() {
        let (alpha, tn) = (0.25, 0.4);
        let kernel = ProposalKernel::new(alpha, tn, 0.3).unwrap();
        let start = PlacementSet::from([("a".to_owned(), RigidTransform::identity())]);
        let mut rng = substream(7, 0, 0);
        let n = 10_000;
        let draws: Vec<Vec3> = (0..n)
            .map(|_| kernel.propose(&start, &BTreeMap::new(), &mut rng)["a"].translation)
            .collect();
        let mean = draws.iter().sum::<Vec3>() / n as f64;
        let cov = draws
            .iter()
            .map(|d| (d - mean) * (d - mean).transpose())
            .sum::<nalgebra::Matrix3<f64>>()
            / (n - 1) as f64;
        let want = alpha * tn * tn;
        for i in 0..3 {
            assert!((cov[(i, i)] / want - 1.0).abs() < 0.05, "var {}", cov[(i, i)]);
            for j in 0..3 {
                if i != j {
                    assert!(cov[(i, j)].abs() < 0.05 * want);
                }
            }
        }
    }

    #[test]
    fn fixed_seed_repeats_the_proposal() {
        let start = PlacementSet::from([("a".to_owned(), RigidTransform::identity())]);
        let a = propose(&start, 0.1, 0.2, 0.3, &mut substream(3, 1, 2)).unwrap();
        let b = propose(&start, 0.1, 0.2, 0.3, &mut substream(3, 1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_density_gives_the_plain_kernel_mean() {
        let inputs = SceneInputs::new(free_part_scene()).with_objective(Arc::new(|_: &AssembledScene| Ok(1.5)));
        let config = SamplerConfig {
            score_samples: 20,
            seed: 5,
            ..SamplerConfig::default()
        };
        let kernel = ProposalKernel::new(0.1, 0.2, 0.3).unwrap();
        let current = inputs.initial_placements().clone();
        let est = estimate_score(&inputs, &current, &kernel, &config, 0).unwrap();
        let var = kernel.trans_sigma.powi(2);
        let mut mean_t = Vec3::zeros();
        let mut mean_r = Vec3::zeros();
        for c in &est.candidates {
            let q = &c.placements["block"];
            mean_t += (q.translation - current["block"].translation) / var;
            mean_r += igso3_log_density_grad(&current["block"].rotation, &q.rotation, kernel.rot_params().unwrap())
                .unwrap();
        }
        let n = est.candidates.len() as f64;
        let (st, sr) = est.score["block"];
        assert!((st - mean_t / n).norm() < 1e-9);
        assert!((sr - mean_r / n).norm() < 1e-9);
    }

    #[test]
    fn underflowing_weights_are_reported() {
        assert!(matches!(density_weights(&[f64::NEG_INFINITY; 3]), Err(Error::AllWeightsZero)));
        let w = density_weights(&[0.0, -1000.0, -1.0]).unwrap();
        assert_eq!(w[1], 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    /// Gaussian smoothing of `exp(-(x-2)^2/2)` with unit kernel variance is
    /// `N(2, 2)`, whose score at 0 is `2 / 2 = 1`.
    #[test]
    fn surrogate_score_matches_smoothed_oracle() {
        let s = surrogate_score(1000, 11);
        assert!(s > 0.0);
        assert!((s - 1.0).abs() < 0.15, "score {s}");
    }

    #[test]
    fn doubling_samples_halves_the_variance() {
        let var = |n: usize| {
            let xs: Vec<f64> = (0..100).map(|seed| surrogate_score(n, 1000 + seed)).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        let ratio = var(50) / var(100);
        assert!((1.4..2.8).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn quadratic_run_finds_the_optimum_and_repeats() {
        let target = Vec3::new(1.0, 2.0, 3.0);
        let energy = move |s: &AssembledScene| {
            Ok(1e3 * (s.placements["block"].translation - target).norm_squared())
        };
        let inputs = SceneInputs::new(free_part_scene())
            .with_objective(Arc::new(energy))
            .with_mask("block", DofMask::translation_only());
        let config = SamplerConfig {
            seed: 4,
            ..SamplerConfig::default()
        };
        let a = run_sampler(&inputs, &config).unwrap();
        assert!((a.best["block"].translation - target).norm() < 0.05);
        assert!(a.trace.best_energies().collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0]));
        let b = run_sampler(&inputs, &config).unwrap();
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        a.trace.write_ndjson(&mut ta).unwrap();
        b.trace.write_ndjson(&mut tb).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a.trace.checkpoints.len(), 12);
    }
}
