//! Small synthetic scenes shared by the examples and the test suite.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::{
    primitives::{cuboid, cylinder, ellipsoid, lathe},
    TriMesh,
};
use crate::kinematics::{JointSpec, KinematicPart, KinematicTree};
use crate::liegroup::{RigidTransform, Rotation, Vec3};

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Floor slab with two walls meeting in a corner at `(-0.9, -0.9)`.
pub fn corner_parent(subdivisions: usize) -> TriMesh {
    let n = subdivisions;
    TriMesh::merged([
        &cuboid(v(-1.0, -1.0, -0.1), v(1.0, 1.0, 0.0), n),
        &cuboid(v(-1.0, -1.0, 0.0), v(-0.9, 1.0, 1.0), n),
        &cuboid(v(-0.9, -1.0, 0.0), v(1.0, -0.9, 1.0), n),
    ])
    .expect("corner parts are valid")
}

/// A block standing in the corner that turns about its vertical axis. The
/// source parent is the corner itself, so placing the block at identity
/// reproduces the source attachment exactly.
pub fn corner_scene(subdivisions: usize) -> KinematicTree {
    let parent = corner_parent(2);
    let block = cuboid(v(-0.8, -0.8, 0.05), v(-0.3, -0.3, 0.45), subdivisions);
    let joint = JointSpec::revolute(
        RigidTransform::from_translation(v(-0.55, -0.55, 0.25)),
        Vec3::z(),
        0.0,
        FRAC_PI_2 / 2.0,
    )
    .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("corner", parent.clone()),
        KinematicPart::child("block", block, "corner", Some(joint)).with_source_parent(parent),
    ])
    .expect("valid tree")
}

/// Open box with inner cavity `[lo, hi]` and walls of thickness `wall`.
pub fn cup(lo: Vec3, hi: Vec3, wall: f64, subdivisions: usize) -> TriMesh {
    let n = subdivisions;
    let w = wall;
    TriMesh::merged([
        &cuboid(v(lo.x - w, lo.y - w, lo.z - w), v(hi.x + w, hi.y + w, lo.z), n),
        &cuboid(v(lo.x - w, lo.y - w, lo.z), v(lo.x, hi.y + w, hi.z), n),
        &cuboid(v(hi.x, lo.y - w, lo.z), v(hi.x + w, hi.y + w, hi.z), n),
        &cuboid(v(lo.x, lo.y - w, lo.z), v(hi.x, lo.y, hi.z), n),
        &cuboid(v(lo.x, hi.y, lo.z), v(hi.x, hi.y + w, hi.z), n),
    ])
    .expect("cup parts are valid")
}

/// A unit block seated in a cup with clearance `gap` on every side and below,
/// sliding upward like a drawer over `[0, lift]`.
pub fn socket_scene(gap: f64, lift: f64, subdivisions: usize) -> KinematicTree {
    let half = 0.5;
    let parent = cup(
        v(-half - gap, -half - gap, -gap),
        v(half + gap, half + gap, 0.8),
        0.15,
        2,
    );
    let block = cuboid(v(-half, -half, 0.0), v(half, half, 1.0), subdivisions);
    let joint = JointSpec::prismatic(RigidTransform::identity(), Vec3::z(), 0.0, lift)
        .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("cup", parent.clone()),
        KinematicPart::child("block", block, "cup", Some(joint)).with_source_parent(parent),
    ])
    .expect("valid tree")
}

/// Closed hollow box: a cup with a lid.
pub fn shell(lo: Vec3, hi: Vec3, wall: f64, subdivisions: usize) -> TriMesh {
    let w = wall;
    let lid = cuboid(v(lo.x - w, lo.y - w, hi.z), v(hi.x + w, hi.y + w, hi.z + w), subdivisions);
    TriMesh::merged([&cup(lo, hi, wall, subdivisions), &lid]).expect("shell parts are valid")
}

/// Unit block sliding upward inside a closed shell. The side clearances
/// differ per axis (`gap`, `1.5 gap`) and the floor clearance is `1.25 gap`,
/// so no block edge sits on a bisector of the cavity.
pub fn drawer_scene(gap: f64, lift: f64, wall: f64, subdivisions: usize) -> KinematicTree {
    let half = 0.5;
    let parent = shell(
        v(-half - gap, -half - 1.5 * gap, -1.25 * gap),
        v(half + gap, half + 1.5 * gap, 1.0 + 2.0 * gap + lift),
        wall,
        2,
    );
    let block = cuboid(v(-half, -half, 0.0), v(half, half, 1.0), subdivisions);
    let joint = JointSpec::prismatic(RigidTransform::identity(), Vec3::z(), 0.0, lift)
        .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("shell", parent.clone()),
        KinematicPart::child("block", block, "shell", Some(joint)).with_source_parent(parent),
    ])
    .expect("valid tree")
}

/// Ellipsoidal pod sliding along x inside an ellipsoidal hull. The hull is a
/// closed shell: an outer skin plus an inward-facing cavity wall leaving
/// clearance `gap` around the pod along every axis at both ends of travel.
pub fn pod_scene(gap: f64, lift: f64, subdivisions: usize) -> KinematicTree {
    let radii = v(0.6, 0.4, 0.3);
    let pod = ellipsoid(Vec3::zeros(), radii, subdivisions, false);
    let centre = v(0.5 * lift, 0.0, 0.0);
    let cavity = radii + v(gap + 0.5 * lift, gap, gap);
    let hull = TriMesh::merged([
        &ellipsoid(centre, cavity, 3, true),
        &ellipsoid(centre, cavity + v(0.3, 0.3, 0.3), 2, false),
    ])
    .expect("hull parts are valid");
    let joint = JointSpec::prismatic(RigidTransform::identity(), Vec3::x(), 0.0, lift)
        .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("hull", hull.clone()),
        KinematicPart::child("pod", pod, "hull", Some(joint)).with_source_parent(hull),
    ])
    .expect("valid tree")
}

fn arc(radius: f64, from: f64, to: f64, steps: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..=steps).map(move |k| {
        let a = from + (to - from) * k as f64 / steps as f64;
        (radius * a.cos(), radius * a.sin())
    })
}

/// Hemispherical bowl centred at the origin, open at `z = 0`.
pub fn bowl(inner: f64, wall: f64, steps: usize, segments: usize) -> TriMesh {
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut profile: Vec<(f64, f64)> = arc(inner + wall, -quarter, 0.0, steps).collect();
    profile.extend(arc(inner, 0.0, -quarter, steps));
    profile[0].0 = 0.0;
    profile.last_mut().expect("non-empty").0 = 0.0;
    lathe(&profile, segments)
}

/// Rod with a hemispherical end of radius `radius` centred at the origin and
/// a flat top at `height`.
pub fn capsule_arm(radius: f64, height: f64, steps: usize, segments: usize) -> TriMesh {
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut profile: Vec<(f64, f64)> = arc(radius, -quarter, 0.0, steps).collect();
    profile[0].0 = 0.0;
    profile.push((radius, 0.5 * height));
    profile.push((radius, height));
    profile.push((0.0, height));
    lathe(&profile, segments)
}

/// Arm whose rounded end sits in a bowl with uniform clearance `gap`,
/// spinning about its own axis over a quarter turn.
pub fn arm_socket_scene(gap: f64, resolution: usize) -> KinematicTree {
    let radius = 0.4;
    let socket = bowl(radius + gap, 0.15, resolution, 4 * resolution);
    let arm = capsule_arm(radius, 1.2, resolution, 4 * resolution);
    let joint = JointSpec::revolute(RigidTransform::identity(), Vec3::z(), 0.0, FRAC_PI_2)
        .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("socket", socket.clone()),
        KinematicPart::child("arm", arm, "socket", Some(joint)).with_source_parent(socket),
    ])
    .expect("valid tree")
}

/// Door frame for a unit door: opening `|x| < 0.56`, `-0.085 < z < 1.085`,
/// depth `-0.1 < y < 0.1`, a back panel from `y = 0.02` and a side wall
/// standing forward of the left jamb. The clearances around the door all
/// differ so that no door edge sits on a bisector between two frame faces.
pub fn door_frame(subdivisions: usize) -> TriMesh {
    let n = subdivisions;
    let (w, h0, h1) = (0.56, -0.085, 1.085);
    let bar = 0.25;
    TriMesh::merged([
        &cuboid(v(-w - bar, -0.1, h0 - bar), v(-w, 0.02, h1 + bar), n),
        &cuboid(v(w, -0.1, h0 - bar), v(w + bar, 0.02, h1 + bar), n),
        &cuboid(v(-w, -0.1, h0 - bar), v(w, 0.02, h0), n),
        &cuboid(v(-w, -0.1, h1), v(w, 0.02, h1 + bar), n),
        &cuboid(v(-w - bar, 0.02, h0 - bar), v(w + bar, 0.12, h1 + bar), n),
        &cuboid(v(-w - bar, -1.3, h0 - bar), v(-0.66, -0.1, h1 + bar), n),
    ])
    .expect("frame parts are valid")
}

/// Door in [`door_frame`], hinged on its left edge and swinging outward by
/// up to a quarter turn until it lies along the side wall. Closed, the scene
/// near the door is symmetric under a half turn about the door normal, so a
/// single closed snapshot cannot tell which edge carries the hinge.
pub fn flap_scene(subdivisions: usize) -> KinematicTree {
    let frame = door_frame(2);
    let door = cuboid(v(-0.5, -0.1, 0.0), v(0.5, 0.0, 1.0), subdivisions);
    let joint = JointSpec::revolute(
        RigidTransform::from_translation(v(-0.56, -0.1, 0.0)),
        Vec3::z(),
        -FRAC_PI_2,
        0.0,
    )
    .expect("valid joint");
    KinematicTree::new([
        KinematicPart::root("frame", frame.clone()),
        KinematicPart::child("door", door, "frame", Some(joint)).with_source_parent(frame),
    ])
    .expect("valid tree")
}

/// Half turn about the normal through the closed door's centre in
/// [`flap_scene`]: the mirror-image optimum of a single closed snapshot.
pub fn flap_flip() -> RigidTransform {
    let about = RigidTransform::from_translation(v(0.0, 0.0, 0.5));
    let turn = Rotation::from_axis_angle(&Vec3::y_axis(), std::f64::consts::PI);
    about * RigidTransform::new(turn, Vec3::zeros()) * about.inverse()
}

/// Rod of radius `r` from `a` to `b`.
fn rod(a: Vec3, b: Vec3, r: f64, segments: usize) -> TriMesh {
    let d = b - a;
    let z = Vec3::z();
    let axis = z.cross(&d);
    let turn = if axis.norm() < 1e-12 {
        if d.z < 0.0 {
            Rotation::from_axis_angle(&Vec3::x(), std::f64::consts::PI)
        } else {
            Rotation::identity()
        }
    } else {
        Rotation::from_axis_angle(&axis, z.angle(&d))
    };
    cylinder(r, 0.0, d.norm(), segments, 1).transformed(&RigidTransform::new(turn, a))
}

pub const LAMP_HEIGHT: f64 = 1.0;
pub const LAMP_REACH: f64 = 0.6;
/// Beam origin in head coordinates; the beam points along the head's -z.
pub const LAMP_BEAM_ORIGIN: [f64; 3] = [0.0, 0.0, -0.2];

/// Desk lamp with two fixed arms reaching out along ±x from the top of a
/// post, each carrying a shade that tilts about its local y axis. Shades are
/// modelled around their hinge point, so the rest placement of a shade is
/// the translation to its arm's tip and each shade's source parent is its
/// arm seen from that hinge point. Arms are their own source attachments.
pub fn lamp_scene(segments: usize) -> KinematicTree {
    let h = LAMP_HEIGHT;
    let stand = TriMesh::merged([
        &cylinder(0.3, 0.0, 0.04, segments, 1),
        &cylinder(0.04, 0.04, h + 0.04, segments, 1),
    ])
    .expect("stand parts are valid");
    let arm = |sign: f64| rod(v(sign * 0.04, 0.0, h), v(sign * (LAMP_REACH + 0.1), 0.0, h), 0.03, segments);
    // A thin neck hangs 0.01 below the arm so the shade clears the arm over
    // the whole tilt range.
    let shade = TriMesh::merged([
        &cylinder(0.01, -0.14, -0.04, segments, 1),
        &cylinder(0.08, -0.2, -0.14, segments, 1),
    ])
    .expect("shade parts are valid");
    let tilt = JointSpec::revolute(
        RigidTransform::from_translation(v(0.0, 0.0, -0.04)),
        Vec3::y(),
        -FRAC_PI_2 / 2.0,
        FRAC_PI_2 / 2.0,
    )
    .expect("valid joint");
    let (arm_a, arm_b) = (arm(1.0), arm(-1.0));
    let from_tip = |m: &TriMesh, sign: f64| m.transformed(&RigidTransform::from_translation(v(-sign * LAMP_REACH, 0.0, -h)));
    let (src_a, src_b) = (from_tip(&arm_a, 1.0), from_tip(&arm_b, -1.0));
    KinematicTree::new([
        KinematicPart::root("stand", stand.clone()),
        KinematicPart::child("arm_a", arm_a.clone(), "stand", None).with_source_parent(stand.clone()),
        KinematicPart::child("arm_b", arm_b.clone(), "stand", None).with_source_parent(stand),
        KinematicPart::child("shade_a", shade.clone(), "arm_a", Some(tilt.clone())).with_source_parent(src_a),
        KinematicPart::child("shade_b", shade, "arm_b", Some(tilt)).with_source_parent(src_b),
    ])
    .expect("valid tree")
}

/// Rest placements of [`lamp_scene`]: shades at their arm tips, arms at
/// identity.
pub fn lamp_rest_placements() -> crate::kinematics::PlacementSet {
    let tip = |sign: f64| RigidTransform::from_translation(v(sign * LAMP_REACH, 0.0, LAMP_HEIGHT));
    [
        ("arm_a", RigidTransform::identity()),
        ("arm_b", RigidTransform::identity()),
        ("shade_a", tip(1.0)),
        ("shade_b", tip(-1.0)),
    ]
    .into_iter()
    .map(|(k, t)| (k.to_owned(), t))
    .collect()
}

/// Floor points for the two shades. Neither lies in the plane its shade
/// sweeps at rest, so each shade has to be turned about its arm or its own
/// axis before the tilt can aim it.
pub fn lamp_targets() -> [(&'static str, Vec3); 2] {
    [("shade_a", v(0.9, -0.5, 0.0)), ("shade_b", v(-0.8, 0.6, 0.0))]
}

pub const FOLD_BOARD: f64 = 0.5;
pub const FOLD_FLAP: f64 = 0.44;
pub const FOLD_THICKNESS: f64 = 0.04;

/// Board with two flaps clamped against its ±x side faces, hinged at the
/// board's top edges so they fold inward and lie flat side by side on top
/// of it. Folded, the assembly is `2·FOLD_THICKNESS` tall instead of
/// `FOLD_THICKNESS + FOLD_FLAP`. `subdivisions` sets the flap resolution,
/// and with it the number of attachment samples.
pub fn foldable_scene(subdivisions: usize) -> KinematicTree {
    let (b, f, t) = (FOLD_BOARD, FOLD_FLAP, FOLD_THICKNESS);
    // Only the flaps' vertices serve as attachment samples; the board can
    // stay coarse.
    let board = cuboid(v(-b, -b, 0.0), v(b, b, t), 1);
    let flap = |sign: f64| {
        let (x0, x1) = if sign < 0.0 { (-b - t, -b) } else { (b, b + t) };
        let mesh = cuboid(v(x0, -b, 0.0), v(x1, b, t + f), subdivisions);
        let hinge = RigidTransform::from_translation(v(sign * b, 0.0, t));
        // Positive angles fold the flap inward over the board.
        let joint = JointSpec::revolute(hinge, Vec3::y() * -sign, 0.0, FRAC_PI_2).expect("valid joint");
        (mesh, joint)
    };
    let (left, lj) = flap(-1.0);
    let (right, rj) = flap(1.0);
    KinematicTree::new([
        KinematicPart::root("board", board.clone()),
        KinematicPart::child("flap_left", left, "board", Some(lj)).with_source_parent(board.clone()),
        KinematicPart::child("flap_right", right, "board", Some(rj)).with_source_parent(board),
    ])
    .expect("valid tree")
}

/// Both flaps of [`foldable_scene`] folded flat.
pub fn foldable_folded_pose(tree: &KinematicTree) -> crate::kinematics::PoseVector {
    crate::kinematics::PoseVector::rest(tree)
        .with("flap_left", vec![FRAC_PI_2])
        .with("flap_right", vec![FRAC_PI_2])
}

/// Cube around the folded [`foldable_scene`] with a little slack.
pub fn foldable_box() -> crate::functionality::PackSpec {
    crate::functionality::PackSpec {
        box_center: v(0.0, 0.0, FOLD_THICKNESS),
        box_half_extent: FOLD_BOARD + FOLD_THICKNESS + 0.02,
    }
}
