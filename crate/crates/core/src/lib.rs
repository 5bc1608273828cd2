pub mod camera;
pub mod database;
pub mod cloud;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod orchestrator;
pub mod planning;
pub mod scanner;
pub mod segmentation;
pub mod spatial;
pub mod voxel;
