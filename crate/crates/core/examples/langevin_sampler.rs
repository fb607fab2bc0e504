//! A short annealed run on a free block pulled toward a target placement.
use std::sync::Arc;

use kitbash::functionality::AssembledScene;
use kitbash::geometry::primitives;
use kitbash::kinematics::{KinematicPart, KinematicTree, PlacementSet, PoseVector};
use kitbash::langevin::{run_sampler, SamplerConfig, SceneInputs};
use kitbash::{RigidTransform, Vec3};

fn main() -> kitbash::Result<()> {
    let tree = KinematicTree::new([
        KinematicPart::root("ground", primitives::unit_cube()),
        KinematicPart::child("block", primitives::cuboid(Vec3::repeat(-0.1), Vec3::repeat(0.1), 1), "ground", None),
    ])?;
    let rest = PoseVector::rest(&tree);
    let start = PlacementSet::from([("block".to_owned(), RigidTransform::identity())]);
    let scene = AssembledScene::new(Arc::new(tree), start, vec![rest])?;

    let goal = Vec3::new(0.5, -0.25, 0.75);
    let inputs = SceneInputs::new(scene).with_objective(Arc::new(move |s: &AssembledScene| {
        Ok(100.0 * (s.placements["block"].translation - goal).norm_squared())
    }));
    let config = SamplerConfig { total_steps: 100, seed: 3, ..SamplerConfig::default() };
    let result = run_sampler(&inputs, &config)?;
    for (i, e) in result.trace.best_energies().enumerate().step_by(20) {
        println!("step {i:3}: best energy {e:.4e}");
    }
    let t = result.best["block"].translation;
    println!("best block position {:.3?}, goal {:.3?}", t.as_slice(), goal.as_slice());
    Ok(())
}
