//! Kinematic kitbashing: assemble reusable articulated parts into new
//! functional objects by optimizing the rigid placement of every part.
//!
//! The crate is organized bottom-up:
//!
//! - [`liegroup`]: SO(3)/SE(3) maps, averaging and the IGSO(3) kernel.
//! - [`geometry`]: triangle meshes, BVH closest-point queries, surface
//!   sampling, vector distance fields and OBJ I/O.
//! - [`kinematics`]: joints, kinematic trees and forward kinematics.
//! - [`attachment`]: the pose-aggregated VDF attachment energy and its
//!   alternating local-global solver.
//! - [`priors`]: center-of-mass pins and exemplar-based transform priors.
//! - [`functionality`]: black-box task objectives (reach, pack, trajectory).
//! - [`langevin`]: annealed Langevin sampling over all part placements.
//! - [`metrics`]: Rooted, Stable, AOR and COV/MMD.
//! - [`pipeline`]: scene configuration, end-to-end runs and artifact export.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory; `kitbash` is a thin command-line front end over [`pipeline`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attachment;
pub mod demo;
pub mod error;
pub mod functionality;
pub mod geometry;
pub mod kinematics;
pub mod langevin;
pub mod liegroup;
pub mod metrics;
pub mod pipeline;
pub mod priors;

pub use error::{Error, Result};
pub use liegroup::{RigidTransform, Rotation, Twist, Vec3};
