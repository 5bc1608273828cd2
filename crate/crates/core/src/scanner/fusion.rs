use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, Provenance};
use crate::geometry::Point;

/// Default dedup radius, meters.
pub const R_DEDUP: f64 = 0.01;

/// The fused scene surface. Points keep a stable id for their whole
/// lifetime so later stages can track them across removals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservedSurface {
    pub cloud: PointCloud,
    pub ids: Vec<u64>,
    /// Sensor position of every fused scan, indexed by scan number.
    pub scan_origins: Vec<Point>,
    r_dedup: f64,
    next_id: u64,
    #[serde(skip)]
    hash: HashMap<[i64; 3], Vec<usize>>,
}

impl ObservedSurface {
    pub fn new(r_dedup: f64) -> Self {
        ObservedSurface {
            cloud: PointCloud::new(),
            ids: Vec::new(),
            scan_origins: Vec::new(),
            r_dedup,
            next_id: 0,
            hash: HashMap::new(),
        }
    }

    pub fn r_dedup(&self) -> f64 {
        self.r_dedup
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.cloud.points
    }

    pub fn scan_count(&self) -> usize {
        self.scan_origins.len()
    }

    fn cell(&self, p: Point) -> [i64; 3] {
        let r = self.r_dedup;
        [(p.x / r).floor() as i64, (p.y / r).floor() as i64, (p.z / r).floor() as i64]
    }

    fn has_neighbor(&self, p: Point) -> bool {
        let c = self.cell(p);
        let r2 = self.r_dedup * self.r_dedup;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.hash.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if list.iter().any(|&i| self.cloud.points[i].dist_sq(p) < r2) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn rebuild_hash(&mut self) {
        self.hash.clear();
        for i in 0..self.cloud.len() {
            let c = self.cell(self.cloud.points[i]);
            self.hash.entry(c).or_default().push(i);
        }
    }

    /// Restores the dedup index after deserialization.
    pub fn reindex(&mut self) {
        self.rebuild_hash();
    }

    /// Inserts every point with no retained point closer than the dedup
    /// radius, tagging provenance with a new scan number. Returns the
    /// indices of the inserted points.
    pub fn fuse(&mut self, cloud: &PointCloud, origin: Point) -> Vec<usize> {
        let scan = self.scan_origins.len() as u32;
        self.scan_origins.push(origin);
        let mut added = Vec::new();
        for (i, &p) in cloud.points.iter().enumerate() {
            if !p.is_finite() || self.has_neighbor(p) {
                continue;
            }
            let idx = self.cloud.len();
            let prov = cloud.provenance.get(i).copied().flatten().map(|pr| Provenance { scan, ..pr });
            self.cloud.push(p, prov);
            self.ids.push(self.next_id);
            self.next_id += 1;
            let c = self.cell(p);
            self.hash.entry(c).or_default().push(idx);
            added.push(idx);
        }
        added
    }

    /// Removes the points at `indices`. Remaining points keep their order.
    pub fn remove(&mut self, indices: &[usize]) {
        if indices.is_empty() {
            return;
        }
        let mut drop = vec![false; self.len()];
        for &i in indices {
            drop[i] = true;
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !drop[i]).collect();
        self.cloud = self.cloud.select(&keep);
        self.ids = keep.iter().map(|&i| self.ids[i]).collect();
        self.rebuild_hash();
    }
}

/// Functional form of [`ObservedSurface::fuse`].
pub fn fuse_scan(mut surface: ObservedSurface, cloud: &PointCloud, origin: Point) -> ObservedSurface {
    surface.fuse(cloud, origin);
    surface
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, step: f64, x0: f64) -> PointCloud {
        PointCloud::from_points((0..n * n).map(|i| Point::new(x0 + (i % n) as f64 * step, (i / n) as f64 * step, 0.0)).collect())
    }

    #[test]
    fn fuse_twice_is_idempotent() {
        let c = grid(20, 0.02, 0.0);
        let s1 = fuse_scan(ObservedSurface::new(R_DEDUP), &c, Point::ZERO);
        let n = s1.len();
        let s2 = fuse_scan(s1.clone(), &c, Point::ZERO);
        assert_eq!(s2.len(), n);
        assert_eq!(s2.points(), s1.points());
    }

    #[test]
    fn fuse_into_empty_dedups() {
        let mut pts = grid(10, 0.02, 0.0).points;
        pts.push(Point::new(0.001, 0.0, 0.0));
        let s = fuse_scan(ObservedSurface::new(R_DEDUP), &PointCloud::from_points(pts), Point::ZERO);
        assert_eq!(s.len(), 100);
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert!(s.points()[i].dist(s.points()[j]) >= R_DEDUP);
            }
        }
    }

    #[test]
    fn disjoint_halves_union() {
        let a = grid(10, 0.02, 0.0);
        let b = grid(10, 0.02, 1.0);
        let s = fuse_scan(fuse_scan(ObservedSurface::new(R_DEDUP), &a, Point::ZERO), &b, Point::ZERO);
        assert_eq!(s.len(), a.len() + b.len());
        assert_eq!(s.scan_count(), 2);
    }

    #[test]
    fn remove_keeps_stable_ids() {
        let mut s = fuse_scan(ObservedSurface::new(R_DEDUP), &grid(3, 0.1, 0.0), Point::ZERO);
        s.remove(&[0, 4]);
        assert_eq!(s.ids, vec![1, 2, 3, 5, 6, 7, 8]);
        assert_eq!(s.fuse(&PointCloud::from_points(vec![Point::ZERO]), Point::ZERO), vec![7]);
        assert_eq!(s.ids[7], 9);
    }
}
