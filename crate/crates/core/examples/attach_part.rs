//! Recover a displaced part with the pose-aggregated attachment solver.
use kitbash::attachment::{build_problem, eval_ekm, solve_attachment, SolverConfig};
use kitbash::demo;
use kitbash::{RigidTransform, Rotation, Vec3};

fn main() -> kitbash::Result<()> {
    let tree = demo::pod_scene(0.05, 0.2, 8);
    let part = tree.part("pod")?;
    let problem = build_problem(part, &tree, &tree.root().mesh, 5)?;
    println!("{} samples over {} poses", problem.sample_count(), problem.pose_count());

    let init = RigidTransform::new(
        Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 0.5).normalize(), 20f64.to_radians()),
        Vec3::new(0.03, -0.02, 0.04),
    );
    println!("initial energy {:.4e}", eval_ekm(&problem, &init));
    let result = solve_attachment(&problem, &init, &SolverConfig::default())?;
    for (i, e) in result.energy_trace.iter().enumerate() {
        println!("  iteration {i}: {e:.4e}");
    }
    println!(
        "converged {} after {} iterations: {:.3} deg, {:.2e} offset from the authored placement",
        result.converged,
        result.iterations(),
        result.placement.rotation.angle().to_degrees(),
        result.placement.translation.norm()
    );
    Ok(())
}
