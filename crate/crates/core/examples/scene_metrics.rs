//! Rooted, stable and overlap metrics on a stacked scene.
use std::sync::Arc;

use kitbash::functionality::AssembledScene;
use kitbash::geometry::primitives;
use kitbash::kinematics::{KinematicPart, KinematicTree, PlacementSet, PoseVector};
use kitbash::metrics::{compute_metrics, cov_mmd, MetricsConfig, ReferenceSet};
use kitbash::{RigidTransform, Vec3};

fn scene(top_offset: f64) -> kitbash::Result<AssembledScene> {
    let base = primitives::cuboid(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.5), 1);
    let top = primitives::cuboid(Vec3::new(0.0, 0.0, 0.5), Vec3::new(1.0, 1.0, 1.0), 1);
    let tree = KinematicTree::new([KinematicPart::root("base", base), KinematicPart::child("top", top, "base", None)])?;
    let placements = PlacementSet::from([("top".to_owned(), RigidTransform::from_translation(Vec3::new(top_offset, 0.0, 0.0)))]);
    let rest = PoseVector::rest(&tree);
    AssembledScene::new(Arc::new(tree), placements, vec![rest])
}

fn main() -> kitbash::Result<()> {
    // The whole stack tips once its combined center leaves the base.
    for offset in [0.0, 0.9, 1.2] {
        let report = compute_metrics(&scene(offset)?, &MetricsConfig::default())?;
        println!("top shifted {offset}: rooted {} stable {} aor {:.3}", report.rooted, report.stable, report.aor);
    }

    let shapes = [primitives::unit_cube(), primitives::icosphere(Vec3::zeros(), 0.6, 2)];
    let reference = ReferenceSet::from_meshes(&shapes, 256)?;
    let generated = ReferenceSet::from_meshes(&shapes[..1], 256)?;
    let (cov, mmd) = cov_mmd(&generated, &reference)?;
    println!("one of two reference shapes generated: cov {cov:.2}, mmd {mmd:.4}");
    Ok(())
}
