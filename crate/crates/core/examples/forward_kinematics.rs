//! Joint limits, forward kinematics and pose-sequence export for a hinged
//! box.
use kitbash::demo;
use kitbash::kinematics::{forward_kinematics, sample_pose_grid, PoseVector};
use kitbash::pipeline::{export_poses, pose_sequence};

fn main() -> kitbash::Result<()> {
    let tree = demo::foldable_scene(1);
    for id in tree.topological_order() {
        let part = tree.part(id)?;
        match &part.joint {
            Some(j) => println!("{id}: {:?} joint, limits {:?}", j.kind, j.limits),
            None => println!("{id}: fixed"),
        }
    }

    let folded = demo::foldable_folded_pose(&tree);
    let world = forward_kinematics(&tree, &folded)?;
    let flap = world["flap_right"];
    println!("folded right flap moves its origin to {:?}", flap.apply_point(&Default::default()).as_slice());

    // Out-of-limit poses are rejected rather than clamped.
    let bad = PoseVector::rest(&tree).with("flap_right", vec![3.0]);
    println!("pose outside limits: {}", forward_kinematics(&tree, &bad).unwrap_err());

    println!("{} grid poses at 3 snapshots per joint", sample_pose_grid(&tree, 3)?.len());
    let dir = std::env::temp_dir().join("kitbash_fk_example");
    let manifest = export_poses(&tree, &Default::default(), &pose_sequence(&tree, 4), &dir)?;
    println!("wrote {} OBJ files to {}", manifest.files.len(), dir.display());
    Ok(())
}
