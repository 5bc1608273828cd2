use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Point, Pose};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    pub fn transformed(&self, pose: &Pose) -> TriangleMesh {
        TriangleMesh {
            vertices: pose.transform_all(&self.vertices),
            triangles: self.triangles.clone(),
        }
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Outward unit normal of triangle `t` (zero for degenerate triangles).
    pub fn normal(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a).normalized().unwrap_or(Point::ZERO)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                0.5 * (b - a).cross(c - a).norm()
            })
            .sum()
    }

    /// Adds an axis-aligned box.
    pub fn add_box(&mut self, min: Point, max: Point) {
        let base = self.vertices.len() as u32;
        for i in 0..8u32 {
            self.vertices.push(Point::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            ));
        }
        const FACES: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        for f in FACES {
            self.triangles.push([base + f[0], base + f[1], base + f[2]]);
            self.triangles.push([base + f[0], base + f[2], base + f[3]]);
        }
    }

    /// Adds a closed vertical cylinder (prism with `segments` sides).
    pub fn add_cylinder(&mut self, base_center: Point, radius: f64, height: f64, segments: usize) {
        let base = self.vertices.len() as u32;
        let n = segments.max(3) as u32;
        for level in 0..2 {
            let z = base_center.z + height * level as f64;
            for i in 0..n {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                self.vertices
                    .push(Point::new(base_center.x + radius * a.cos(), base_center.y + radius * a.sin(), z));
            }
        }
        let bottom_c = base + 2 * n;
        let top_c = bottom_c + 1;
        self.vertices.push(base_center);
        self.vertices.push(base_center + Point::new(0.0, 0.0, height));
        for i in 0..n {
            let j = (i + 1) % n;
            let (b0, b1, t0, t1) = (base + i, base + j, base + n + i, base + n + j);
            self.triangles.push([b0, b1, t1]);
            self.triangles.push([b0, t1, t0]);
            self.triangles.push([bottom_c, b1, b0]);
            self.triangles.push([top_c, t0, t1]);
        }
    }

    /// Deterministic area-proportional surface samples with outward
    /// normals, roughly `spacing` apart.
    pub fn sample_surface(&self, spacing: f64) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let n = self.normal(t);
            let longest = (b - a).norm().max((c - a).norm()).max((c - b).norm());
            let steps = ((longest / spacing).ceil() as usize).max(1);
            for i in 0..steps {
                for j in 0..(steps - i) {
                    let u = (i as f64 + 1.0 / 3.0) / steps as f64;
                    let v = (j as f64 + 1.0 / 3.0) / steps as f64;
                    out.push((a + (b - a) * u + (c - a) * v, n));
                }
            }
        }
        out
    }
}

/// Ray/triangle intersection (Möller–Trumbore, two-sided). Returns the ray
/// parameter of the hit.
#[inline]
pub fn intersect_triangle(origin: Point, dir: Point, a: Point, e1: Point, e2: Point) -> Option<f64> {
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 1e-9).then_some(t)
}

/// Surface representation of catalog shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Mesh(TriangleMesh),
    /// Dense point set; each point renders as a splat of `radius`.
    Points { points: Vec<Point>, radius: f64 },
}

impl Geometry {
    pub fn aabb(&self) -> Option<Aabb> {
        match self {
            Geometry::Mesh(m) => m.aabb(),
            Geometry::Points { points, .. } => Aabb::from_points(points),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Geometry::Mesh(m) => m.is_empty(),
            Geometry::Points { points, .. } => points.is_empty(),
        }
    }

    pub fn transformed(&self, pose: &Pose) -> Geometry {
        match self {
            Geometry::Mesh(m) => Geometry::Mesh(m.transformed(pose)),
            Geometry::Points { points, radius } => Geometry::Points {
                points: pose.transform_all(points),
                radius: radius * pose.scale,
            },
        }
    }

    /// Surface samples with normals. Point sets carry no orientation, so
    /// their normals are zero.
    pub fn sample_surface(&self, spacing: f64) -> Vec<(Point, Point)> {
        match self {
            Geometry::Mesh(m) => m.sample_surface(spacing),
            Geometry::Points { points, .. } => points.iter().map(|p| (*p, Point::ZERO)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_normals_point_outward() {
        let mut m = TriangleMesh::new();
        m.add_box(Point::ZERO, Point::new(1.0, 2.0, 3.0));
        let c = Point::new(0.5, 1.0, 1.5);
        for t in 0..m.triangles.len() {
            let [a, b, cc] = m.corners(t);
            let mid = (a + b + cc) / 3.0;
            assert!(m.normal(t).dot(mid - c) > 0.0, "triangle {t}");
        }
        assert!((m.area() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_normals_point_outward() {
        let mut m = TriangleMesh::new();
        m.add_cylinder(Point::ZERO, 0.5, 1.0, 12);
        let c = Point::new(0.0, 0.0, 0.5);
        for t in 0..m.triangles.len() {
            let [a, b, cc] = m.corners(t);
            let mid = (a + b + cc) / 3.0;
            assert!(m.normal(t).dot(mid - c) > 0.0, "triangle {t}");
        }
    }

    #[test]
    fn ray_hits_triangle() {
        let a = Point::new(-1.0, -1.0, 2.0);
        let t = intersect_triangle(Point::ZERO, Point::Z, a, Point::new(2.0, 0.0, 0.0), Point::new(0.0, 2.0, 0.0));
        assert!((t.unwrap() - 2.0).abs() < 1e-12);
        assert!(intersect_triangle(Point::ZERO, -Point::Z, a, Point::new(2.0, 0.0, 0.0), Point::new(0.0, 2.0, 0.0)).is_none());
    }
}
