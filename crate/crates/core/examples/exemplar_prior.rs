//! Fit a transform prior from exemplar records and score placements
//! against it, alongside a center-of-mass pin.
use kitbash::geometry::primitives;
use kitbash::priors::{parse_exemplars, pin_energy, prior_energy, priors_from_records, PinConstraint};
use kitbash::{RigidTransform, Vec3};

const EXEMPLARS: &str = r#"[
  {"parent_label": "table", "child_label": "leg", "rotation_axis_angle": [0, 0, 0], "translation": [0.4, 0.4, -0.5]},
  {"parent_label": "table", "child_label": "leg", "rotation_axis_angle": [0, 0, 0.1], "translation": [0.42, 0.38, -0.5]},
  {"parent_label": "table", "child_label": "lamp", "rotation_axis_angle": [0, 0, 0], "translation": [0, 0, 0.3]}
]"#;

fn main() -> kitbash::Result<()> {
    let records = parse_exemplars(EXEMPLARS)?;
    for prior in priors_from_records(&records, 0.3)? {
        let (parent, child) = &prior.label_pair;
        let near = prior.exemplars[0];
        let far = RigidTransform::from_translation(near.translation + Vec3::new(1.0, 0.0, 0.0));
        println!(
            "{parent} -> {child}: {} exemplars, energy {:.3} at an exemplar, {:.3} one unit away",
            prior.exemplars.len(),
            prior_energy(&prior, &near)?,
            prior_energy(&prior, &far)?
        );
    }

    let cube = primitives::unit_cube();
    let pin = PinConstraint::new("leg", Vec3::new(0.5, 0.5, 0.0), 10.0)?;
    for z in [0.0, -0.5, -1.0] {
        let p = RigidTransform::from_translation(Vec3::new(0.0, 0.0, z));
        println!("pin energy with the cube at z = {z}: {:.3}", pin_energy(&pin, &p, &cube));
    }
    Ok(())
}
