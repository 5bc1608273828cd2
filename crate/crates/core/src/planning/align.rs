//! Candidate models aligned to the object of interest as voxel shape priors.

use serde::{Deserialize, Serialize};

use crate::database::{Database, SimilarModelSet};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Aabb, Point, Pose};
use crate::segmentation::objectness::matching_rate_tree;
use crate::spatial::KdTree;
use crate::voxel::{blur, ScalarField, VoxelGrid};

pub const YAW_STEPS: usize = 36;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedCandidate {
    pub entry: u32,
    /// Maps the model frame onto the object of interest.
    pub pose: Pose,
    /// d(γ, m) after alignment.
    pub residual: f64,
    /// O(γ, m) from retrieval.
    pub objectness: f64,
    /// Blurred occupancy f(·, m) on the shared grid.
    pub field: ScalarField,
}

/// Voxel edge for an object: Diag/32 clamped to [1 cm, 10 cm].
pub fn object_resolution(diag: f64) -> f64 {
    (diag / 32.0).clamp(0.01, 0.1)
}

/// Grid around an object wide enough to hold any candidate scaled to the
/// object's diagonal and centered on its centroid.
pub fn object_grid(points: &[Point]) -> Result<VoxelGrid> {
    let bb = Aabb::from_points(points).ok_or(Error::EmptyCloud)?;
    let res = object_resolution(bb.diag());
    VoxelGrid::covering(&bb, res, 0.6 * bb.diag() + 3.0 * res)
}

/// Blurred occupancy of `points` on `grid`; points outside are ignored.
pub fn field_of(points: &[Point], grid: &VoxelGrid, blur_sigma: f64) -> Result<ScalarField> {
    let mut occ = ScalarField::zeros(*grid);
    for p in points {
        if let Some(i) = grid.index_of(*p) {
            occ.set(i, 1.0);
        }
    }
    blur(&occ, blur_sigma)
}

/// Scales the model to the query's diagonal, aligns centroids and picks
/// the yaw among 36 steps with the smallest d(query, model). Returns the
/// pose and that residual.
pub fn align_model(query: &[Point], query_diag: f64, model: &[Point], model_diag: f64) -> Result<(Pose, f64)> {
    let cq = centroid(query).ok_or(Error::EmptyCloud)?;
    let cm = centroid(model).ok_or(Error::EmptyCloud)?;
    if !(model_diag > 0.0) {
        return Err(Error::DegenerateComponent);
    }
    let scale = query_diag / model_diag;
    let mut best: Option<(Pose, f64)> = None;
    for k in 0..YAW_STEPS {
        let yaw = k as f64 * std::f64::consts::TAU / YAW_STEPS as f64;
        let t = cq - (cm * scale).rotate_z(yaw);
        let pose = Pose::new(t, yaw, scale);
        let moved = pose.transform_all(model);
        let residual = matching_rate_tree(query, &KdTree::new(&moved));
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((pose, residual));
        }
    }
    Ok(best.expect("at least one yaw step"))
}

/// Aligns every candidate of `similar` to the query and rasterizes it on
/// `grid`, in the order of `similar`.
pub fn align_candidates(
    query_keypoints: &[Point],
    query_diag: f64,
    similar: &SimilarModelSet,
    db: &Database,
    grid: &VoxelGrid,
    blur_sigma: f64,
) -> Result<Vec<AlignedCandidate>> {
    similar
        .items
        .iter()
        .map(|m| {
            let e = db.entry(m.entry);
            let (pose, residual) = align_model(query_keypoints, query_diag, &e.keypoints, e.diag)?;
            let field = field_of(&pose.transform_all(&e.cloud.points), grid, blur_sigma)?;
            Ok(AlignedCandidate {
                entry: m.entry,
                pose,
                residual,
                objectness: m.score,
                field,
            })
        })
        .collect()
}
