//! Episode driver: configuration, floor and wall detection, the scanning
//! loop, traces and plots.

pub mod config;
pub mod episode;
pub mod planes;
pub mod svg;
pub mod trace;

pub use config::{Config, CONFIG_SCHEMA_VERSION};
pub use episode::{
    classify_object_state, replace_with_model, run_episode, run_episode_with, CurveSample, Observer,
    ReconstructionResult, RecognizedObject, ResidualObject, Snapshot,
};
pub use planes::{detect_floor_walls, FloorWalls, Plane, PlaneParams};
pub use trace::{emit_trace, read_trace, replay, EpisodeTrace, ObjectState, ScanKind, TraceEvent};
