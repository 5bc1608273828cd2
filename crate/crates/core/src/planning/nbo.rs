//! Next-best-object selection: objectness plus view saliency.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::segmentation::SegmentedObject;

use super::RobotState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NboWeights {
    pub w_z: f64,
    pub w_e: f64,
    pub w_d: f64,
}

impl Default for NboWeights {
    fn default() -> Self {
        NboWeights {
            w_z: 1.5,
            w_e: 1.0,
            w_d: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NboScore {
    pub object: u32,
    pub objectness: f64,
    pub s_z: f64,
    pub s_e: f64,
    pub s_d: f64,
    pub total: f64,
}

/// What NBO scoring needs to know about an object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NboInput {
    pub id: u32,
    pub objectness: f64,
    pub centroid: Point,
    pub area: f64,
}

impl From<&SegmentedObject> for NboInput {
    fn from(r: &SegmentedObject) -> Self {
        NboInput {
            id: r.id,
            objectness: r.objectness,
            centroid: r.centroid,
            area: r.area,
        }
    }
}

/// Scores of every object in `all`, in input order.
pub fn nbo_scores(all: &[NboInput], state: &RobotState, w: &NboWeights) -> Vec<NboScore> {
    let max_dist = all.iter().map(|r| r.centroid.dist(state.position)).fold(0.0, f64::max);
    let max_area = all.iter().map(|r| r.area).fold(0.0, f64::max);
    all.iter()
        .map(|r| {
            let offset = r.centroid - state.position;
            let s_z = if max_dist > 0.0 { (-offset.norm() / max_dist).exp() } else { 1.0 };
            let s_e = offset
                .normalized()
                .map_or(1.0, |u| u.dot(state.view_direction).clamp(0.0, 1.0));
            let s_d = if max_area > 0.0 { r.area / max_area } else { 0.0 };
            NboScore {
                object: r.id,
                objectness: r.objectness,
                s_z,
                s_e,
                s_d,
                total: r.objectness + w.w_z * s_z + w.w_e * s_e + w.w_d * s_d,
            }
        })
        .collect()
}

/// Score of `r` among `all`.
pub fn nbo_score(r: &NboInput, all: &[NboInput], state: &RobotState, w: &NboWeights) -> NboScore {
    let scores = nbo_scores(all, state, w);
    scores
        .into_iter()
        .find(|s| s.object == r.id)
        .unwrap_or_else(|| nbo_scores(std::slice::from_ref(r), state, w)[0])
}

/// Index of the highest total, ties to the smallest object id.
pub fn argmax_nbo(scores: &[NboScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let sb = &scores[b];
                if s.total > sb.total || (s.total == sb.total && s.object < sb.object) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// The next best object with its score breakdown for every candidate, or
/// `None` when there are no objects.
pub fn select_nbo(all: &[NboInput], state: &RobotState, w: &NboWeights) -> Option<(usize, Vec<NboScore>)> {
    let scores = nbo_scores(all, state, w);
    argmax_nbo(&scores).map(|i| (i, scores))
}
