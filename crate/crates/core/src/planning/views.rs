//! Viewpoint candidates around the object of interest.

use crate::camera::{CameraModel, Viewpoint};
use crate::geometry::{Aabb, Point};
use crate::voxel::{visible_from, ScalarField};

/// Camera height above the floor, meters.
pub const H_CAM: f64 = 1.2;

/// Distance from the object center to its candidate views.
pub fn view_radius(diag: f64, cam: &CameraModel) -> f64 {
    (1.5 * diag).clamp(cam.d_min + 0.2, cam.d_max - 0.2)
}

/// `n_v` viewpoints equally spaced on a horizontal circle around `center`,
/// starting on +x, at height `h_cam`, each looking at `center`.
pub fn circle_viewpoints(center: Point, radius: f64, n_v: usize, h_cam: f64) -> Vec<Viewpoint> {
    (0..n_v)
        .filter_map(|k| {
            let a = k as f64 * std::f64::consts::TAU / n_v as f64;
            let pos = Point::new(center.x + radius * a.cos(), center.y + radius * a.sin(), h_cam);
            Viewpoint::look_at(pos, center).ok()
        })
        .collect()
}

/// False when the position is outside the mapped grid or in an occupied
/// voxel, or when none of `targets` can be seen from it.
pub fn view_is_valid(view: &Viewpoint, occupancy: &ScalarField, targets: &[usize]) -> bool {
    match occupancy.grid.index_of(view.position) {
        None => false,
        Some(own) if occupancy.is_occupied(own) => false,
        Some(_) => targets.iter().any(|&t| visible_from(occupancy, view.position, t)),
    }
}

/// Candidate views for an object with center `center` and diagonal `diag`
/// whose observed voxels in `occupancy` are `targets`. Returns the circle
/// index of each surviving candidate with its viewpoint.
pub fn sample_viewpoints(
    center: Point,
    diag: f64,
    targets: &[usize],
    n_v: usize,
    occupancy: &ScalarField,
    cam: &CameraModel,
    h_cam: f64,
) -> Vec<(usize, Viewpoint)> {
    circle_viewpoints(center, view_radius(diag, cam), n_v, h_cam)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| view_is_valid(v, occupancy, targets))
        .collect()
}

/// Radius multipliers tried, in order, when looking for a fallback view.
pub const FALLBACK_RADII: [f64; 5] = [1.0, 0.8, 1.25, 0.6, 1.5];

/// Positions closer than this to an earlier scan are not reused as
/// fallback views, meters.
pub const REVISIT_RADIUS: f64 = 0.3;

/// Valid circle views (over several radii) ranked by how many free voxels
/// inside `bbox` they see, most first; ties keep generation order. Views
/// within [`REVISIT_RADIUS`] of a `visited` position are left out.
#[allow(clippy::too_many_arguments)]
pub fn fallback_views(
    center: Point,
    diag: f64,
    bbox: &Aabb,
    targets: &[usize],
    n_v: usize,
    occupancy: &ScalarField,
    cam: &CameraModel,
    h_cam: f64,
    visited: &[Point],
) -> Vec<Viewpoint> {
    let grid = &occupancy.grid;
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| bbox.contains(grid.center(i)) && !occupancy.is_occupied(i))
        .collect();
    let base = view_radius(diag, cam);
    let mut ranked: Vec<(usize, Viewpoint)> = Vec::new();
    for f in FALLBACK_RADII {
        let r = (base * f).clamp(cam.d_min + 0.05, cam.d_max - 0.05);
        for v in circle_viewpoints(center, r, n_v, h_cam) {
            if visited.iter().any(|p| p.dist(v.position) < REVISIT_RADIUS) || !view_is_valid(&v, occupancy, targets) {
                continue;
            }
            let count = inside
                .iter()
                .filter(|&&i| cam.sees(&v, grid.center(i)) && visible_from(occupancy, v.position, i))
                .count();
            ranked.push((count, v));
        }
    }
    ranked.sort_by_key(|r| std::cmp::Reverse(r.0));
    ranked.into_iter().map(|(_, v)| v).collect()
}
