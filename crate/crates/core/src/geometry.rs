//! Basic 3D geometry: points/vectors, axis-aligned boxes and upright
//! similarity poses.
//!
//! The world frame is z-up with the floor at `z = 0`. Furniture is upright,
//! so object poses carry a yaw about the vertical axis, a translation and a
//! uniform scale.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point (or free vector) in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const ZERO: Point = Point::new(0.0, 0.0, 0.0);
    pub const X: Point = Point::new(1.0, 0.0, 0.0);
    pub const Y: Point = Point::new(0.0, 1.0, 0.0);
    pub const Z: Point = Point::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point) -> Point {
        Point::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist_sq(self, o: Point) -> f64 {
        (self - o).norm_sq()
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        self.dist_sq(o).sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Point) -> Point {
        Point::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point) -> Point {
        Point::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Horizontal (xy) part of the vector.
    pub fn horizontal(self) -> Point {
        Point::new(self.x, self.y, 0.0)
    }

    /// Rotates about the vertical axis through the origin.
    pub fn rotate_z(self, yaw: f64) -> Point {
        let (s, c) = yaw.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    #[inline]
    fn div(self, s: f64) -> Point {
        Point::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y, -self.z)
    }
}

/// Arithmetic mean of a non-empty point set.
pub fn centroid(points: &[Point]) -> Option<Point> {
    if points.is_empty() {
        return None;
    }
    let mut acc = Point::ZERO;
    for p in points {
        acc += *p;
    }
    Some(acc / points.len() as f64)
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Aabb { min, max }
    }

    pub fn from_points(points: &[Point]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb::new(first, first);
        for p in &points[1..] {
            b.min = b.min.min(*p);
            b.max = b.max.max(*p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Point {
        self.max - self.min
    }

    pub fn diag(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.min.min(o.min), self.max.max(o.max))
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Point::new(margin, margin, margin);
        Aabb::new(self.min - m, self.max + m)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn intersection(&self, o: &Aabb) -> Option<Aabb> {
        let min = self.min.max(o.min);
        let max = self.max.min(o.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then(|| Aabb::new(min, max))
    }

    /// Volumetric intersection over union.
    pub fn iou(&self, o: &Aabb) -> f64 {
        let inter = self.intersection(o).map_or(0.0, |b| b.volume());
        let union = self.volume() + o.volume() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Slab test. Returns the parametric entry/exit interval of the ray
    /// `origin + t * dir` clipped to `[t_min, t_max]`.
    pub fn ray_interval(&self, origin: Point, dir: Point, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for axis in 0..3 {
            let o = origin.get(axis);
            let d = dir.get(axis);
            let lo = self.min.get(axis);
            let hi = self.max.get(axis);
            if d.abs() < 1e-15 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((lo - o) * inv, (hi - o) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Upright similarity transform: `p -> Rz(yaw) * (scale * p) + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Point,
    /// Rotation about +z, radians.
    pub yaw: f64,
    pub scale: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        translation: Point::ZERO,
        yaw: 0.0,
        scale: 1.0,
    };

    pub fn new(translation: Point, yaw: f64, scale: f64) -> Self {
        Pose { translation, yaw, scale }
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        (p * self.scale).rotate_z(self.yaw) + self.translation
    }

    /// Rotates a direction (no translation, no scale).
    pub fn apply_dir(&self, d: Point) -> Point {
        d.rotate_z(self.yaw)
    }

    pub fn inverse(&self) -> Pose {
        let inv_scale = 1.0 / self.scale;
        let t = (-self.translation).rotate_z(-self.yaw) * inv_scale;
        Pose::new(t, -self.yaw, inv_scale)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(self.apply(other.translation), self.yaw + other.yaw, self.scale * other.scale)
    }

    pub fn transform_all(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|p| self.apply(*p)).collect()
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
