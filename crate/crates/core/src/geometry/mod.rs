//! Triangle meshes, closest-point queries and vector distance fields.

mod bvh;
mod distance;
mod mesh;
mod obj;
pub mod primitives;
mod sampling;
mod vdf;

pub use bvh::{
    build_bvh, closest_point_on_triangle, ray_triangle, triangles_intersect, Bvh, Feature,
    Projection,
};
pub use distance::{
    intersects, mesh_distance, point_cloud_chamfer, point_inside, surface_gap, Placed,
    CHAMFER_SAMPLES,
};
pub use mesh::{aabb, bbox_diagonal, Aabb, TriMesh, MIN_RELATIVE_AREA};
pub use obj::{obj_string, obj_string_with_digits, parse_obj, read_obj, round_significant, write_obj, OBJ_DIGITS};
pub use sampling::{
    sample_surface, vdf_source_samples, SurfaceSample, FIXED_SAMPLE_SEED, VDF_MAX_SAMPLES,
};
pub use vdf::{compute_vdf, VdfSnapshot};

/// Closest point on `bvh`'s mesh; free-function form of [`Bvh::closest_point`].
pub fn closest_point(bvh: &Bvh, query: &crate::liegroup::Vec3) -> Projection {
    bvh.closest_point(query)
}
