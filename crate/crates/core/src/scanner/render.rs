//! Depth rendering, sensor noise and back-projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Viewpoint};
use crate::cloud::{PointCloud, Provenance, SurfaceId};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};
use crate::scanner::mesh::{intersect_triangle, Geometry, TriangleMesh};
use crate::scanner::scene::Scene;
use crate::spatial::KdTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub camera: CameraModel,
    pub pose: Viewpoint,
    /// Row-major z-depths in meters; `None` marks an invalid pixel.
    pub depths: Vec<Option<f64>>,
    pub hits: Vec<Option<SurfaceId>>,
    /// Set when the viewpoint is inside scene geometry.
    pub inside_geometry: bool,
}

impl DepthImage {
    pub fn invalid(camera: CameraModel, pose: Viewpoint) -> Self {
        let n = camera.pixel_count();
        DepthImage {
            camera,
            pose,
            depths: vec![None; n],
            hits: vec![None; n],
            inside_geometry: false,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_some()).count()
    }

    pub fn depth_at(&self, u: usize, v: usize) -> Option<f64> {
        self.depths[v * self.camera.width + u]
    }
}

struct Triangle {
    a: Point,
    e1: Point,
    e2: Point,
    normal: Point,
}

enum Body {
    Mesh { tris: Vec<Triangle>, closed: bool },
    Points { points: Vec<Point>, radius: f64, tree: KdTree },
}

struct Surface {
    id: SurfaceId,
    aabb: Aabb,
    body: Body,
}

/// World-space geometry ready for ray casting.
pub struct PreparedScene {
    surfaces: Vec<Surface>,
}

fn mesh_triangles(m: &TriangleMesh) -> Vec<Triangle> {
    (0..m.triangles.len())
        .filter_map(|t| {
            let [a, b, c] = m.corners(t);
            let (e1, e2) = (b - a, c - a);
            let normal = e1.cross(e2).normalized()?;
            Some(Triangle { a, e1, e2, normal })
        })
        .collect()
}

impl PreparedScene {
    pub fn new() -> Self {
        PreparedScene { surfaces: Vec::new() }
    }

    /// Adds world-space geometry. `closed` meshes take part in the
    /// inside-geometry check.
    pub fn add(&mut self, id: SurfaceId, geometry: &Geometry, closed: bool) {
        let Some(aabb) = geometry.aabb() else { return };
        let body = match geometry {
            Geometry::Mesh(m) => Body::Mesh {
                tris: mesh_triangles(m),
                closed,
            },
            Geometry::Points { points, radius } => Body::Points {
                points: points.clone(),
                radius: *radius,
                tree: KdTree::new(points),
            },
        };
        let pad = match &body {
            Body::Points { radius, .. } => *radius,
            Body::Mesh { .. } => 1e-9,
        };
        self.surfaces.push(Surface {
            id,
            aabb: aabb.expanded(pad),
            body,
        });
    }

    /// Scene objects, floor polygon and wall quads.
    pub fn from_scene(scene: &Scene) -> Self {
        let mut ps = PreparedScene::new();
        for o in &scene.objects {
            ps.add(SurfaceId::Object(o.id), &o.world_geometry(), true);
        }
        let h = scene.floor.height;
        let poly = &scene.floor.polygon;
        if poly.len() >= 3 {
            let mut floor = TriangleMesh::new();
            floor.vertices = poly.iter().map(|p| Point::new(p[0], p[1], h)).collect();
            for i in 1..poly.len() as u32 - 1 {
                floor.triangles.push([0, i, i + 1]);
            }
            ps.add(SurfaceId::Floor, &Geometry::Mesh(floor), false);
        }
        for (i, w) in scene.walls.iter().enumerate() {
            let mut quad = TriangleMesh::new();
            quad.vertices = vec![
                Point::new(w.from[0], w.from[1], h),
                Point::new(w.to[0], w.to[1], h),
                Point::new(w.to[0], w.to[1], h + w.height),
                Point::new(w.from[0], w.from[1], h + w.height),
            ];
            quad.triangles = vec![[0, 1, 2], [0, 2, 3]];
            ps.add(SurfaceId::Wall(i as u32), &Geometry::Mesh(quad), false);
        }
        ps
    }

    /// Nearest mesh hit along `origin + t * dir` with `t < t_max`.
    fn cast_meshes(&self, origin: Point, dir: Point, t_max: f64) -> Option<(f64, SurfaceId, Point)> {
        let mut best: Option<(f64, SurfaceId, Point)> = None;
        for s in &self.surfaces {
            let Body::Mesh { tris, .. } = &s.body else { continue };
            let limit = best.map_or(t_max, |b| b.0);
            if s.aabb.ray_interval(origin, dir, 0.0, limit).is_none() {
                continue;
            }
            for tri in tris {
                if let Some(t) = intersect_triangle(origin, dir, tri.a, tri.e1, tri.e2) {
                    if t < best.map_or(t_max, |b| b.0) {
                        best = Some((t, s.id, tri.normal));
                    }
                }
            }
        }
        best
    }

    /// True when `p` lies inside a closed mesh (the nearest hit is a back
    /// face in most axis directions) or within a point-set splat.
    pub fn is_inside(&self, p: Point) -> bool {
        for s in &self.surfaces {
            if let Body::Points { radius, tree, .. } = &s.body {
                if tree.any_within(p, *radius) {
                    return true;
                }
            }
        }
        let dirs = [Point::X, -Point::X, Point::Y, -Point::Y, Point::Z, -Point::Z];
        let mut back = 0;
        for d in dirs {
            let mut best: Option<(f64, Point)> = None;
            for s in &self.surfaces {
                let Body::Mesh { tris, closed: true } = &s.body else { continue };
                if !s.aabb.contains(p) {
                    continue;
                }
                for tri in tris {
                    if let Some(t) = intersect_triangle(p, d, tri.a, tri.e1, tri.e2) {
                        if best.is_none_or(|b| t < b.0) {
                            best = Some((t, tri.normal));
                        }
                    }
                }
            }
            if best.is_some_and(|(_, n)| n.dot(d) > 0.0) {
                back += 1;
            }
        }
        back >= 4
    }
}

impl Default for PreparedScene {
    fn default() -> Self {
        Self::new()
    }
}

pub fn render_depth(scene: &Scene, pose: &Viewpoint, cam: &CameraModel) -> DepthImage {
    render_prepared(&PreparedScene::from_scene(scene), pose, cam)
}

/// Ray casts every pixel. Point sets are splatted at their forward depth
/// onto the pixels their radius covers.
pub fn render_prepared(scene: &PreparedScene, pose: &Viewpoint, cam: &CameraModel) -> DepthImage {
    let mut img = DepthImage::invalid(*cam, *pose);
    if scene.is_inside(pose.position) {
        img.inside_geometry = true;
        return img;
    }
    let (w, h) = (cam.width, cam.height);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let far = cam.d_max * 1.5 + 1.0;
    for v in 0..h {
        for u in 0..w {
            let ray = pose.pixel_ray(cam, u, v);
            if let Some((t, id, _)) = scene.cast_meshes(pose.position, ray, far) {
                let i = v * w + u;
                zbuf[i] = t;
                img.hits[i] = Some(id);
            }
        }
    }
    let (r, up, f) = pose.basis();
    let px_per_unit = cam.width as f64 * 0.5 / (cam.hfov * 0.5).tan();
    for s in &scene.surfaces {
        let Body::Points { points, radius, .. } = &s.body else { continue };
        for p in points {
            let d = *p - pose.position;
            let z = d.dot(f);
            let Some((pu, pv)) = cam.project(d.dot(r), d.dot(up), z) else { continue };
            let rad = radius / z * px_per_unit;
            let (u0, u1) = ((pu - rad).round().max(0.0), (pu + rad).round());
            let (v0, v1) = ((pv - rad).round().max(0.0), (pv + rad).round());
            if u1 < 0.0 || v1 < 0.0 {
                continue;
            }
            let (u0, u1) = (u0 as usize, (u1 as usize).min(w.saturating_sub(1)));
            let (v0, v1) = (v0 as usize, (v1 as usize).min(h.saturating_sub(1)));
            for vv in v0..=v1 {
                for uu in u0..=u1 {
                    let du = uu as f64 - pu;
                    let dv = vv as f64 - pv;
                    if du * du + dv * dv > rad * rad + 0.5 {
                        continue;
                    }
                    let i = vv * w + uu;
                    if z < zbuf[i] {
                        zbuf[i] = z;
                        img.hits[i] = Some(s.id);
                    }
                }
            }
        }
    }
    for i in 0..w * h {
        let z = zbuf[i];
        if z >= cam.d_min && z <= cam.d_max {
            img.depths[i] = Some(z);
        } else {
            img.hits[i] = None;
        }
    }
    img
}

/// Multiplicative Gaussian depth noise. Perturbed depths that leave the
/// valid range become invalid.
pub fn add_noise(img: &DepthImage, noise_sigma_rel: f64, seed: u64) -> Result<DepthImage> {
    if !(noise_sigma_rel >= 0.0) {
        return Err(Error::InvalidParameter("noise_sigma_rel must be non-negative".into()));
    }
    let mut out = img.clone();
    if noise_sigma_rel == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (d, hit) in out.depths.iter_mut().zip(out.hits.iter_mut()) {
        if let Some(z) = *d {
            let n: f64 = StandardNormal.sample(&mut rng);
            let z = z + noise_sigma_rel * z * n;
            if z >= img.camera.d_min && z <= img.camera.d_max {
                *d = Some(z);
            } else {
                *d = None;
                *hit = None;
            }
        }
    }
    Ok(out)
}

/// Back-projects valid pixels to world coordinates. Provenance carries the
/// hit surface with scan index 0.
pub fn depth_to_cloud(img: &DepthImage) -> PointCloud {
    let cam = &img.camera;
    let mut cloud = PointCloud::with_capacity(img.valid_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            let i = v * cam.width + u;
            if let Some(z) = img.depths[i] {
                let p = img.pose.position + img.pose.pixel_ray(cam, u, v) * z;
                let prov = img.hits[i].map(|source| Provenance { source, scan: 0 });
                cloud.push(p, prov);
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanner::scene::{EntryPose, Floor};

    fn empty_scene() -> Scene {
        Scene {
            objects: vec![],
            floor: Floor {
                height: 0.0,
                polygon: vec![],
            },
            walls: vec![],
            entry: EntryPose {
                position: [0.0, 0.0],
                height: 1.2,
            },
        }
    }

    fn wall_ahead(dist: f64) -> PreparedScene {
        let mut m = TriangleMesh::new();
        m.add_box(Point::new(-5.0, -5.0, -dist - 0.1), Point::new(5.0, 5.0, -dist));
        let mut ps = PreparedScene::new();
        ps.add(SurfaceId::Wall(0), &Geometry::Mesh(m), false);
        ps
    }

    fn down_view() -> Viewpoint {
        Viewpoint::new(Point::ZERO, -Point::Z, Point::Y).unwrap()
    }

    #[test]
    fn wall_two_meters_ahead() {
        let cam = CameraModel::default();
        let img = render_prepared(&wall_ahead(2.0), &down_view(), &cam);
        let d = img.depth_at(cam.width / 2, cam.height / 2).unwrap();
        assert!((d - 2.0).abs() < 1e-9);
        assert_eq!(img.valid_count(), cam.pixel_count());
        assert_eq!(img.hits[0], Some(SurfaceId::Wall(0)));
    }

    #[test]
    fn too_close_is_invalid() {
        let cam = CameraModel::default();
        let img = render_prepared(&wall_ahead(0.5 * cam.d_min), &down_view(), &cam);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn empty_scene_all_invalid() {
        let cam = CameraModel::default();
        let img = render_depth(&empty_scene(), &down_view(), &cam);
        assert_eq!(img.valid_count(), 0);
        assert!(depth_to_cloud(&img).is_empty());
    }

    #[test]
    fn inside_box_flags_warning() {
        let mut m = TriangleMesh::new();
        m.add_box(Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0));
        let mut ps = PreparedScene::new();
        ps.add(SurfaceId::Object(0), &Geometry::Mesh(m), true);
        let img = render_prepared(&ps, &down_view(), &CameraModel::default());
        assert!(img.inside_geometry);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn center_pixel_back_projects_on_axis() {
        let cam = CameraModel::default();
        let img = render_prepared(&wall_ahead(2.5), &down_view(), &cam);
        let cloud = depth_to_cloud(&img);
        let center = cloud.points[(cam.height / 2) * cam.width + cam.width / 2];
        assert!(center.dist(Point::new(0.0, 0.0, -2.5)) < 1e-9);
    }

    #[test]
    fn point_target_round_trip() {
        let cam = CameraModel::default();
        let target = Point::new(0.3, -0.2, -2.0);
        let mut ps = PreparedScene::new();
        ps.add(
            SurfaceId::Object(7),
            &Geometry::Points {
                points: vec![target],
                radius: 0.001,
            },
            false,
        );
        let cloud = depth_to_cloud(&render_prepared(&ps, &down_view(), &cam));
        assert!(!cloud.is_empty());
        for p in &cloud.points {
            assert!(p.dist(target) < 0.01, "{p:?}");
        }
        assert_eq!(cloud.provenance[0].unwrap().source, SurfaceId::Object(7));
    }

    #[test]
    fn zero_noise_is_identity_and_seeded() {
        let cam = CameraModel::default();
        let img = render_prepared(&wall_ahead(2.0), &down_view(), &cam);
        assert_eq!(add_noise(&img, 0.0, 1).unwrap(), img);
        assert_eq!(add_noise(&img, 0.01, 9).unwrap(), add_noise(&img, 0.01, 9).unwrap());
        assert!(add_noise(&img, -1.0, 0).is_err());
    }

    #[test]
    fn noise_std_matches_sigma() {
        let cam = CameraModel {
            width: 400,
            height: 250,
            ..CameraModel::default()
        };
        let mut img = DepthImage::invalid(cam, down_view());
        img.depths.iter_mut().for_each(|d| *d = Some(2.0));
        let noisy = add_noise(&img, 0.01, 42).unwrap();
        let vals: Vec<f64> = noisy.depths.iter().map(|d| d.unwrap()).collect();
        assert_eq!(vals.len(), 100_000);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var.sqrt() - 0.02).abs() < 0.05 * 0.02);
    }
}
