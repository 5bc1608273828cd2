//! Next-best-object and next-best-view planning plus navigation.

pub mod align;
pub mod gain;
pub mod nav;
pub mod nbo;
pub mod views;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

pub use align::{align_candidates, AlignedCandidate};
pub use gain::{conditional_info_gain, select_nbv, ViewCandidate};
pub use nav::{frontier_target, plan_path, FloorMap, Grid2, NavGrid, NavPath};
pub use nbo::{nbo_score, select_nbo, NboInput, NboScore, NboWeights};
pub use views::{fallback_views, sample_viewpoints, REVISIT_RADIUS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Point,
    /// Unit viewing direction.
    pub view_direction: Point,
    /// Meters driven so far.
    pub traveled: f64,
}

impl RobotState {
    pub fn new(position: Point, view_direction: Point) -> Self {
        RobotState {
            position,
            view_direction: view_direction.normalized().unwrap_or(Point::X),
            traveled: 0.0,
        }
    }
}
