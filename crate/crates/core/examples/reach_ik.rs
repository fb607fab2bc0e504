//! Aim the lamp's shades with damped least squares and score the reach
//! objective at the authored placements. The authored arms are too short
//! to aim straight at these targets; moving the shades is the sampler's job
//! (see the `solve` subcommand), so a residual error is expected here.
use std::sync::Arc;

use kitbash::demo;
use kitbash::functionality::{ik_solve, reach_objective, AssembledScene, Objective, ReachTarget, IK_MAX_ITERS};
use kitbash::kinematics::{forward_kinematics_placed, PoseVector};
use kitbash::Vec3;

fn main() -> kitbash::Result<()> {
    let tree = Arc::new(demo::lamp_scene(10));
    let placements = demo::lamp_rest_placements();
    let beam = Vec3::from(demo::LAMP_BEAM_ORIGIN);
    let targets: Vec<ReachTarget> = demo::lamp_targets()
        .iter()
        .map(|(id, t)| ReachTarget::aim(*id, beam, -Vec3::z(), *t, 1.0))
        .collect();

    for t in &targets {
        let ik = ik_solve(&tree, &placements, t, IK_MAX_ITERS)?;
        let world = forward_kinematics_placed(&tree, &placements, &ik.pose)?;
        let dev = t.angular_deviation(&world[&t.part_id]).unwrap_or(f64::NAN);
        println!(
            "{}: {} iterations, joint {:.3?}, beam off target by {:.2} deg",
            t.part_id,
            ik.trace.len() - 1,
            ik.pose.get(&t.part_id).unwrap_or_default(),
            dev.to_degrees()
        );
    }

    let scene = AssembledScene::new(tree.clone(), placements, vec![PoseVector::rest(&tree)])?;
    println!("reach energy at the authored layout {:.4}", reach_objective(targets)?.evaluate(&scene)?);
    Ok(())
}
