use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Pinhole depth sensor. Rays pass through integer pixel coordinates with
/// the principal point at `(width / 2, height / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Horizontal field of view, radians.
    pub hfov: f64,
    /// Vertical field of view, radians.
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
    /// Valid scanning range, meters.
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            hfov: 60f64.to_radians(),
            vfov: 45f64.to_radians(),
            width: 160,
            height: 120,
            d_min: 0.4,
            d_max: 4.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        if !(self.hfov > 0.0 && self.hfov < pi && self.vfov > 0.0 && self.vfov < pi) {
            return Err(Error::InvalidParameter("field of view must lie in (0, pi)".into()));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(Error::InvalidParameter("need 0 < d_min < d_max".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image must have pixels".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn tan_half(&self) -> (f64, f64) {
        ((self.hfov * 0.5).tan(), (self.vfov * 0.5).tan())
    }

    /// Normalized image-plane offsets `(a, b)` for pixel `(u, v)`: the ray is
    /// `forward + a * right + b * up` and has unit forward component.
    pub fn pixel_offsets(&self, u: usize, v: usize) -> (f64, f64) {
        let (th, tv) = self.tan_half();
        let cx = self.width as f64 * 0.5;
        let cy = self.height as f64 * 0.5;
        let a = (u as f64 - cx) / cx * th;
        let b = -(v as f64 - cy) / cy * tv;
        (a, b)
    }

    /// Projects a camera-frame point `(right, up, forward)` to continuous
    /// pixel coordinates. `None` when behind the camera.
    pub fn project(&self, right: f64, up: f64, forward: f64) -> Option<(f64, f64)> {
        if forward <= 1e-9 {
            return None;
        }
        let (th, tv) = self.tan_half();
        let cx = self.width as f64 * 0.5;
        let cy = self.height as f64 * 0.5;
        let u = right / forward / th * cx + cx;
        let v = -(up / forward) / tv * cy + cy;
        Some((u, v))
    }

    /// True when `p` lies in the viewing frustum of `view` within
    /// `[d_min, d_max]` Euclidean range.
    pub fn sees(&self, view: &Viewpoint, p: Point) -> bool {
        let d = p - view.position;
        let range = d.norm();
        if range < self.d_min || range > self.d_max {
            return false;
        }
        let (r, u, f) = view.basis();
        match self.project(d.dot(r), d.dot(u), d.dot(f)) {
            Some((px, py)) => {
                px >= -0.5 && py >= -0.5 && px <= self.width as f64 - 0.5 && py <= self.height as f64 - 0.5
            }
            None => false,
        }
    }
}

/// Sensor pose: position plus orthonormal viewing frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub position: Point,
    pub view_direction: Point,
    pub up: Point,
}

impl Viewpoint {
    pub fn new(position: Point, view_direction: Point, up: Point) -> Result<Self> {
        let f = view_direction
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("zero view direction".into()))?;
        let u = up.normalized().ok_or_else(|| Error::InvalidParameter("zero up vector".into()))?;
        if f.cross(u).norm() < 1e-9 {
            return Err(Error::InvalidParameter("view direction parallel to up".into()));
        }
        Ok(Viewpoint {
            position,
            view_direction: f,
            up: u,
        })
    }

    /// Looks from `position` toward `target` with world +z as the up hint
    /// (falls back to +y when looking straight up or down).
    pub fn look_at(position: Point, target: Point) -> Result<Self> {
        let f = (target - position)
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("look_at target equals position".into()))?;
        let hint = if f.cross(Point::Z).norm() < 1e-6 { Point::Y } else { Point::Z };
        Viewpoint::new(position, f, hint)
    }

    /// Orthonormal `(right, up, forward)` camera axes.
    pub fn basis(&self) -> (Point, Point, Point) {
        let f = self.view_direction;
        let r = f.cross(self.up).normalized().unwrap_or(Point::X);
        let u = r.cross(f);
        (r, u, f)
    }

    /// Unnormalized ray direction for pixel `(u, v)` with unit forward
    /// component, so the ray parameter equals z-depth.
    pub fn pixel_ray(&self, cam: &CameraModel, u: usize, v: usize) -> Point {
        let (r, up, f) = self.basis();
        let (a, b) = cam.pixel_offsets(u, v);
        f + r * a + up * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_camera_is_valid() {
        CameraModel::default().validate().unwrap();
        let bad = CameraModel {
            d_min: 5.0,
            ..CameraModel::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn center_pixel_ray_is_optical_axis() {
        let cam = CameraModel::default();
        let v = Viewpoint::new(Point::ZERO, -Point::Z, Point::Y).unwrap();
        let ray = v.pixel_ray(&cam, cam.width / 2, cam.height / 2);
        assert!(ray.dist(-Point::Z) < 1e-12);
    }

    #[test]
    fn project_inverts_pixel_ray() {
        let cam = CameraModel::default();
        let v = Viewpoint::look_at(Point::new(0.0, 0.0, 1.2), Point::new(2.0, 1.0, 0.5)).unwrap();
        let (r, u, f) = v.basis();
        let ray = v.pixel_ray(&cam, 17, 93);
        let (px, py) = cam.project(ray.dot(r), ray.dot(u), ray.dot(f)).unwrap();
        assert!((px - 17.0).abs() < 1e-9 && (py - 93.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_up_rejected() {
        assert!(Viewpoint::new(Point::ZERO, Point::Z, Point::Z).is_err());
    }
}
