//! Object-wise coverage rate and quality over ground-truth surface voxels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Viewpoint};
use crate::cloud::SurfaceId;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scanner::render::{render_prepared, PreparedScene};
use crate::scanner::scene::Scene;
use crate::voxel::VoxelGrid;

/// Edge of the evaluation voxels, meters.
pub const COVERAGE_RESOLUTION: f64 = 0.05;

/// Spacing of the ground-truth surface samples, meters.
const SAMPLE_SPACING: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub sigma: f64,
    pub theta_t: f64,
    pub d_min: f64,
    pub d_t: f64,
}

impl QualityParams {
    pub fn for_camera(cam: &CameraModel) -> Self {
        QualityParams {
            sigma: 0.6,
            theta_t: std::f64::consts::FRAC_PI_2,
            d_min: cam.d_min,
            d_t: cam.d_max,
        }
    }
}

/// q for a surface seen at angle `theta` (radians, unsigned) from
/// distance `d`.
pub fn view_quality(theta: f64, d: f64, p: &QualityParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    (-(theta * theta) / (s2 * p.theta_t)).exp() * (-(d - p.d_min).powi(2) / (s2 * p.d_t)).exp()
}

/// q of a surface point with outward `normal` seen from `camera`; 0 when
/// the surface faces away.
pub fn quality_at(point: Point, normal: Point, camera: Point, p: &QualityParams) -> f64 {
    let to_cam = camera - point;
    let d = to_cam.norm();
    let Some(n) = normal.normalized() else { return 0.0 };
    if d == 0.0 {
        return 0.0;
    }
    let cos = n.dot(to_cam) / d;
    if cos <= 0.0 {
        return 0.0;
    }
    view_quality(cos.min(1.0).acos(), d, p)
}

/// Fraction of surface voxels both detected and visible.
pub fn coverage_rate(detected: &[bool], visible: &[bool]) -> Result<f64> {
    if detected.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if detected.len() != visible.len() {
        return Err(Error::LengthMismatch(detected.len(), visible.len()));
    }
    let n = detected.iter().zip(visible).filter(|(d, v)| **d && **v).count();
    Ok(n as f64 / detected.len() as f64)
}

/// Mean of `q` over surface voxels that are detected and visible (others
/// count as 0).
pub fn coverage_quality(detected: &[bool], visible: &[bool], q: &[f64]) -> Result<f64> {
    if detected.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if detected.len() != visible.len() || detected.len() != q.len() {
        return Err(Error::LengthMismatch(detected.len(), visible.len().min(q.len())));
    }
    let s: f64 = (0..detected.len())
        .filter(|&i| detected[i] && visible[i])
        .map(|i| q[i])
        .fold(0.0, |a, b| a + b);
    Ok(s / detected.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceVoxel {
    pub index: usize,
    pub object: u32,
    /// Ground-truth surface samples (point, outward normal) in the voxel.
    pub samples: Vec<(Point, Point)>,
}

/// Ground-truth object surfaces voxelized on a scene grid. Faces resting on
/// the floor (downward normals within 2 cm of it) are left out since no
/// view can reach them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtSurface {
    pub grid: VoxelGrid,
    pub voxels: Vec<SurfaceVoxel>,
}

impl GtSurface {
    pub fn from_scene(scene: &Scene, resolution: f64) -> Result<GtSurface> {
        let grid = VoxelGrid::covering(&scene.bounds(), resolution, resolution)?;
        let mut map: BTreeMap<usize, SurfaceVoxel> = BTreeMap::new();
        let floor = scene.floor.height;
        for o in &scene.objects {
            let geom = o.world_geometry();
            let mut samples = geom.sample_surface(SAMPLE_SPACING);
            if samples.iter().all(|(_, n)| *n == Point::ZERO) {
                let c = geom.aabb().map_or(Point::ZERO, |b| b.center());
                samples.iter_mut().for_each(|(p, n)| *n = (*p - c).normalized().unwrap_or(Point::Z));
            }
            for (p, n) in samples {
                if n.z < -0.9 && p.z - floor < 0.02 {
                    continue;
                }
                let Some(idx) = grid.index_of(p) else { continue };
                map.entry(idx)
                    .or_insert_with(|| SurfaceVoxel {
                        index: idx,
                        object: o.id,
                        samples: Vec::new(),
                    })
                    .samples
                    .push((p, n));
            }
        }
        Ok(GtSurface {
            grid,
            voxels: map.into_values().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Per-voxel visibility and best quality accumulated over executed views.
#[derive(Clone, Debug)]
pub struct CoverageTracker {
    pub surface: GtSurface,
    pub camera: CameraModel,
    pub params: QualityParams,
    slot: BTreeMap<usize, usize>,
    pub visible: Vec<bool>,
    pub quality: Vec<f64>,
    pub views: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectCoverage {
    pub object: u32,
    pub voxels: usize,
    pub r_cover: f64,
    pub q_cover: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub r_cover: f64,
    pub q_cover: f64,
    pub per_object: Vec<ObjectCoverage>,
}

impl CoverageTracker {
    pub fn new(surface: GtSurface, camera: CameraModel) -> Self {
        let slot = surface.voxels.iter().enumerate().map(|(k, v)| (v.index, k)).collect();
        let n = surface.len();
        CoverageTracker {
            params: QualityParams::for_camera(&camera),
            surface,
            camera,
            slot,
            visible: vec![false; n],
            quality: vec![0.0; n],
            views: 0,
        }
    }

    /// Renders the ground truth from `view` (noise free) and marks every
    /// surface voxel hit by a valid pixel. A voxel's quality uses its
    /// center and the normal of its sample nearest to the hit.
    pub fn add_view(&mut self, scene: &PreparedScene, view: &Viewpoint) {
        self.views += 1;
        let img = render_prepared(scene, view, &self.camera);
        let grid = self.surface.grid;
        for v in 0..self.camera.height {
            for u in 0..self.camera.width {
                let i = v * self.camera.width + u;
                let (Some(z), Some(SurfaceId::Object(_))) = (img.depths[i], img.hits[i]) else { continue };
                let hit = view.position + view.pixel_ray(&self.camera, u, v) * z;
                let Some(&k) = grid.index_of(hit).and_then(|idx| self.slot.get(&idx)) else { continue };
                let vox = &self.surface.voxels[k];
                let normal = vox
                    .samples
                    .iter()
                    .min_by(|a, b| a.0.dist_sq(hit).total_cmp(&b.0.dist_sq(hit)))
                    .map_or(Point::ZERO, |s| s.1);
                let q = quality_at(grid.center(vox.index), normal, view.position, &self.params);
                self.visible[k] = true;
                self.quality[k] = self.quality[k].max(q);
            }
        }
    }

    /// Coverage given the set of detected ground-truth object ids.
    pub fn report(&self, detected_objects: &[u32]) -> Result<CoverageReport> {
        let detected: Vec<bool> = self
            .surface
            .voxels
            .iter()
            .map(|v| detected_objects.contains(&v.object))
            .collect();
        let r_cover = coverage_rate(&detected, &self.visible)?;
        let q_cover = coverage_quality(&detected, &self.visible, &self.quality)?;
        let mut ids: Vec<u32> = self.surface.voxels.iter().map(|v| v.object).collect();
        ids.sort_unstable();
        ids.dedup();
        let per_object = ids.into_iter().map(|id| self.object_coverage(id)).collect();
        Ok(CoverageReport {
            r_cover,
            q_cover,
            per_object,
        })
    }

    /// Coverage of one object's voxels, counting the object as detected.
    pub fn object_coverage(&self, object: u32) -> ObjectCoverage {
        let ks: Vec<usize> = (0..self.surface.len())
            .filter(|&k| self.surface.voxels[k].object == object)
            .collect();
        let n = ks.len();
        let seen = ks.iter().filter(|&&k| self.visible[k]).count();
        let q = ks.iter().filter(|&&k| self.visible[k]).fold(0.0, |a, &k| a + self.quality[k]);
        let denom = n.max(1) as f64;
        ObjectCoverage {
            object,
            voxels: n,
            r_cover: seen as f64 / denom,
            q_cover: q / denom,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_examples() {
        let p = QualityParams::for_camera(&CameraModel::default());
        assert_eq!(view_quality(0.0, p.d_min, &p), 1.0);
        let expected = (-0.09f64 / (0.36 * std::f64::consts::FRAC_PI_2)).exp();
        assert!((view_quality(0.3, p.d_min, &p) - expected).abs() < 1e-12);
        assert!((view_quality(0.3, p.d_min, &p) - 0.8528).abs() < 1e-4);
        assert_eq!(quality_at(Point::ZERO, Point::Z, Point::new(0.0, 0.0, -1.0), &p), 0.0);
    }

    #[test]
    fn rate_and_quality_counting() {
        let all = [true; 4];
        assert_eq!(coverage_rate(&all, &all).unwrap(), 1.0);
        assert_eq!(coverage_rate(&[false; 4], &all).unwrap(), 0.0);
        assert_eq!(coverage_rate(&all, &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(coverage_quality(&all, &all, &[1.0; 4]).unwrap(), 1.0);
        assert_eq!(coverage_quality(&[false; 4], &all, &[1.0; 4]).unwrap(), 0.0);
        assert!(coverage_rate(&[], &[]).is_err());
    }
}
