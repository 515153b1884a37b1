//! Corresponded meshes, per-vertex features and indicators, and their
//! flattening into instance vectors.

mod cohort;
mod layout;
mod mesh;
mod voxels;

pub use cohort::{load_cohort, write_cohort, Cohort, CohortSpec};
pub use layout::{devectorize, vectorize, Instance, InstanceLayout};
pub use mesh::{read_mesh, write_mesh, TriangleMesh};
pub use voxels::{assign_voxels_to_vertices, nearest_vertex};
