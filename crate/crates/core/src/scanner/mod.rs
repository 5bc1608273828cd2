//! Simulated depth sensor: ground-truth scenes, ray-cast depth images and
//! scan fusion.

pub mod fusion;
pub mod io;
pub mod mesh;
pub mod render;
pub mod scene;
pub mod synth;

pub use fusion::{fuse_scan, ObservedSurface, R_DEDUP};
pub use mesh::{Geometry, TriangleMesh};
pub use render::{add_noise, depth_to_cloud, render_depth, render_prepared, DepthImage, PreparedScene};
pub use scene::{CatalogModel, EntryPose, Floor, GroundTruthObject, Scene, SceneFile, Wall};
