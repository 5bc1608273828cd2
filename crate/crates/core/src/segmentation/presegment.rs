//! Near-convex decomposition by normal-based region growing.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::geometry::Point;
use crate::spatial::{median_spacing, plane_fit, KdTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresegParams {
    /// Normal estimation radius in units of median point spacing.
    pub normal_radius_factor: f64,
    /// Lower bound on the normal estimation radius, meters.
    pub min_normal_radius: f64,
    /// Region connectivity radius in units of median point spacing.
    pub connect_factor: f64,
    /// Normals closer than this always join, degrees.
    pub smooth_angle_deg: f64,
    /// Concave pairs whose normals differ by more than this never join,
    /// degrees.
    pub concave_angle_deg: f64,
    /// Points whose mean normal convergence is stronger than this (1/m)
    /// sit in a concave crease: they join a region but do not grow it.
    pub crease_curvature: f64,
}

impl Default for PresegParams {
    fn default() -> Self {
        PresegParams {
            normal_radius_factor: 3.0,
            min_normal_radius: 0.04,
            connect_factor: 2.5,
            smooth_angle_deg: 25.0,
            concave_angle_deg: 15.0,
            crease_curvature: 5.0,
        }
    }
}

/// Unit normals from local plane fits, oriented toward the sensor origin of
/// each point's scan (`origins[provenance.scan]`) when known. Points without
/// a known origin are oriented by propagation over the k-nearest-neighbour
/// graph, smoothest edges first, starting from the highest point of each
/// connected piece with its normal facing up.
pub fn estimate_normals(cloud: &PointCloud, tree: &KdTree, radius: f64, origins: &[Point]) -> Vec<Point> {
    let pts = &cloud.points;
    let mut normals: Vec<Point> = pts
        .iter()
        .map(|p| {
            let mut nb: Vec<Point> = tree.within(*p, radius).into_iter().map(|j| pts[j]).collect();
            if nb.len() < 5 {
                nb = tree.k_nearest(*p, 8).into_iter().map(|(j, _)| pts[j]).collect();
            }
            plane_fit(&nb).map_or(Point::Z, |(n, _)| n)
        })
        .collect();
    let mut fixed = vec![false; pts.len()];
    for (i, p) in pts.iter().enumerate() {
        if let Some(pr) = cloud.provenance.get(i).copied().flatten() {
            if let Some(o) = origins.get(pr.scan as usize) {
                if normals[i].dot(*o - *p) < 0.0 {
                    normals[i] = -normals[i];
                }
                fixed[i] = true;
            }
        }
    }
    if fixed.iter().all(|f| *f) {
        return normals;
    }
    let mut order: Vec<usize> = (0..pts.len()).filter(|&i| !fixed[i]).collect();
    order.sort_by(|&a, &b| pts[b].z.total_cmp(&pts[a].z).then(a.cmp(&b)));
    let mut heap = BinaryHeap::new();
    for start in order {
        if fixed[start] {
            continue;
        }
        if normals[start].z < 0.0 {
            normals[start] = -normals[start];
        }
        fixed[start] = true;
        heap.push(Reverse((0u64, start, start)));
        while let Some(Reverse((_, from, i))) = heap.pop() {
            if i != from {
                if fixed[i] {
                    continue;
                }
                if normals[i].dot(normals[from]) < 0.0 {
                    normals[i] = -normals[i];
                }
                fixed[i] = true;
            }
            for (j, _) in tree.k_nearest(pts[i], 10) {
                if !fixed[j] {
                    let w = 1.0 - normals[i].dot(normals[j]).abs();
                    heap.push(Reverse((w.max(0.0).to_bits(), i, j)));
                }
            }
        }
    }
    normals
}

/// `(n_p - n_q) . (p - q) > 0`: the surfaces bend away from each other.
pub fn is_convex(p: Point, np: Point, q: Point, nq: Point) -> bool {
    (np - nq).dot(p - q) > 0.0
}

/// Mean of `(n_q - n_p) . (q - p) / |q - p|²` over neighbours within
/// `radius`: negative where normals converge (concave), positive where they
/// diverge (convex).
pub fn normal_divergence(points: &[Point], normals: &[Point], tree: &KdTree, radius: f64) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (mut sum, mut n) = (0.0, 0usize);
            for j in tree.within(*p, radius) {
                let d = points[j] - *p;
                let l2 = d.norm_sq();
                if l2 > 0.0 {
                    sum += (normals[j] - normals[i]).dot(d) / l2;
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect()
}

/// Partition of the cloud into near-convex regions, as ascending index
/// lists ordered by their smallest index.
pub fn presegment(cloud: &PointCloud, origins: &[Point], params: &PresegParams) -> Vec<Vec<usize>> {
    let n = cloud.len();
    if n == 0 {
        return Vec::new();
    }
    let tree = KdTree::new(&cloud.points);
    let spacing = median_spacing(&cloud.points, &tree);
    let r_n = (params.normal_radius_factor * spacing).max(params.min_normal_radius);
    let normals = estimate_normals(cloud, &tree, r_n, origins);
    let crease: Vec<bool> = normal_divergence(&cloud.points, &normals, &tree, r_n)
        .into_iter()
        .map(|k| k < -params.crease_curvature)
        .collect();
    let r_c = (params.connect_factor * spacing).max(1e-6);
    let cos_smooth = params.smooth_angle_deg.to_radians().cos();
    let cos_concave = params.concave_angle_deg.to_radians().cos();
    let mut label = vec![usize::MAX; n];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..n {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let mut members = vec![seed];
        label[seed] = id;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let (pp, np) = (cloud.points[p], normals[p]);
            for q in tree.within(pp, r_c) {
                if label[q] != usize::MAX {
                    continue;
                }
                let (qp, nq) = (cloud.points[q], normals[q]);
                let cos = np.dot(nq);
                let join = if is_convex(pp, np, qp, nq) {
                    true
                } else {
                    cos >= cos_smooth && cos >= cos_concave
                };
                if join {
                    label[q] = id;
                    members.push(q);
                    if !crease[q] {
                        stack.push(q);
                    }
                }
            }
        }
        members.sort_unstable();
        regions.push(members);
    }
    regions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanner::mesh::TriangleMesh;

    fn sample(m: &TriangleMesh, spacing: f64) -> PointCloud {
        PointCloud::from_points(m.sample_surface(spacing).into_iter().map(|x| x.0).collect())
    }

    #[test]
    fn separated_clusters_split() {
        let mut m = TriangleMesh::new();
        m.add_box(Point::ZERO, Point::new(0.2, 0.2, 0.2));
        m.add_box(Point::new(1.2, 0.0, 0.0), Point::new(1.4, 0.2, 0.2));
        let regions = presegment(&sample(&m, 0.01), &[], &PresegParams::default());
        assert_eq!(regions.len(), 2);
    }

    #[test]
    fn sphere_is_one_component() {
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                Point::new(0.5 * r * a.cos(), 0.5 * r * a.sin(), 0.5 * z)
            })
            .collect();
        let regions = presegment(&PointCloud::from_points(pts), &[], &PresegParams::default());
        assert_eq!(regions.len(), 1);
    }

    #[test]
    fn l_shape_splits_at_concave_crease() {
        // Open L: a floor slab and a wall slab meeting at x = 0, sampled on
        // the inner faces only. Ground truth: slab membership.
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        let step = 0.01;
        for i in 0..60 {
            for j in 0..40 {
                pts.push(Point::new(0.005 + i as f64 * step, j as f64 * step, 0.0));
                truth.push(0);
                pts.push(Point::new(0.0, j as f64 * step, 0.005 + i as f64 * step));
                truth.push(1);
            }
        }
        let mut cloud = PointCloud::from_points(pts.clone());
        cloud.provenance = vec![
            Some(crate::cloud::Provenance {
                source: crate::cloud::SurfaceId::Floor,
                scan: 0
            });
            pts.len()
        ];
        let origin = [Point::new(0.5, 0.2, 0.5)];
        let regions = presegment(&cloud, &origin, &PresegParams::default());
        let big: Vec<&Vec<usize>> = regions.iter().filter(|r| r.len() > 100).collect();
        assert_eq!(big.len(), 2, "{:?}", regions.iter().map(|r| r.len()).collect::<Vec<_>>());
        for r in big {
            let ones = r.iter().filter(|&&i| truth[i] == 1).count();
            let purity = ones.max(r.len() - ones) as f64 / r.len() as f64;
            assert!(purity > 0.9);
        }
    }
}
