//! Static 3D kd-tree and local surface analysis.
//!
//! Query results are deterministic: equal distances break toward the
//! smaller point index.

use crate::geometry::Point;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = self.points[self.order[start]];
        let mut hi = lo;
        for &i in &self.order[start..end] {
            lo = lo.min(self.points[i]);
            hi = hi.max(self.points[i]);
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        if ext.get(axis) <= 0.0 {
            // All points coincide.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a].get(axis).total_cmp(&pts[b].get(axis)).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]].get(axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Nearest point index and squared distance.
    pub fn nearest(&self, q: Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    /// Nearest point no farther than `radius`, with its squared distance.
    pub fn nearest_within(&self, q: Point, radius: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, radius * radius);
        self.nearest_rec(0, q, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, node: usize, q: Point, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = self.points[i].dist_sq(q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.get(axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// Up to `k` nearest points sorted by (distance, index).
    pub fn k_nearest(&self, q: Point, k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.points.is_empty() {
            self.knn_rec(0, q, k, &mut heap);
        }
        heap
    }

    fn knn_rec(&self, node: usize, q: Point, k: usize, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = self.points[i].dist_sq(q);
                    if out.len() == k {
                        let worst = out[k - 1];
                        if d > worst.1 || (d == worst.1 && i > worst.0) {
                            continue;
                        }
                    }
                    let pos = out
                        .binary_search_by(|e| e.1.total_cmp(&d).then(e.0.cmp(&i)))
                        .unwrap_or_else(|p| p);
                    out.insert(pos, (i, d));
                    if out.len() > k {
                        out.pop();
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.get(axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, out);
                if out.len() < k || diff * diff <= out[out.len() - 1].1 {
                    self.knn_rec(far, q, k, out);
                }
            }
        }
    }

    /// Indices within `radius` (inclusive), ascending.
    pub fn within(&self, q: Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, node: usize, q: Point, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if self.points[i].dist_sq(q) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.get(axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.within_rec(far, q, r2, out);
                }
            }
        }
    }

    pub fn any_within(&self, q: Point, radius: f64) -> bool {
        self.nearest(q).is_some_and(|(_, d)| d <= radius * radius)
    }
}

/// Median nearest-neighbour spacing (0 for fewer than two points).
pub fn median_spacing(points: &[Point], tree: &KdTree) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    // Subsample large clouds with a fixed stride.
    let stride = (points.len() / 4000).max(1);
    let mut d: Vec<f64> = points
        .iter()
        .step_by(stride)
        .filter_map(|p| tree.k_nearest(*p, 2).get(1).map(|x| x.1.sqrt()))
        .collect();
    d.sort_by(|a, b| a.total_cmp(b));
    d[d.len() / 2]
}

/// Eigen-decomposition of a symmetric 3x3 matrix (Jacobi rotations).
/// Returns eigenvalues ascending with matching unit eigenvectors.
pub fn symmetric_eigen(m: [[f64; 3]; 3]) -> ([f64; 3], [Point; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off < 1e-15 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]];
    let vecs = [
        Point::new(v[0][idx[0]], v[1][idx[0]], v[2][idx[0]]),
        Point::new(v[0][idx[1]], v[1][idx[1]], v[2][idx[1]]),
        Point::new(v[0][idx[2]], v[1][idx[2]], v[2][idx[2]]),
    ];
    (vals, vecs)
}

/// Local plane fit: returns (unit normal, surface variation in [0, 1/3]).
/// Needs at least three points.
pub fn plane_fit(points: &[Point]) -> Option<(Point, f64)> {
    if points.len() < 3 {
        return None;
    }
    let c = crate::geometry::centroid(points)?;
    let mut m = [[0.0; 3]; 3];
    for p in points {
        let d = (*p - c).to_array();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += d[i] * d[j];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(m);
    let total = vals.iter().sum::<f64>();
    let variation = if total > 0.0 { vals[0].max(0.0) / total } else { 0.0 };
    Some((vecs[0].normalized()?, variation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = random_points(500, 1);
        let tree = KdTree::new(&pts);
        for q in random_points(100, 2) {
            let (i, d) = tree.nearest(q).unwrap();
            let best = pts
                .iter()
                .enumerate()
                .map(|(j, p)| (j, p.dist_sq(q)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!((i, d), best);
        }
    }

    #[test]
    fn knn_and_within_match_brute_force() {
        let pts = random_points(300, 3);
        let tree = KdTree::new(&pts);
        for q in random_points(30, 4) {
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(j, p)| (j, p.dist_sq(q))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(tree.k_nearest(q, 7), all[..7].to_vec());
            let mut inside: Vec<usize> = all.iter().filter(|e| e.1 <= 0.04).map(|e| e.0).collect();
            inside.sort_unstable();
            assert_eq!(tree.within(q, 0.2), inside);
            let near = (all[0].1 <= 0.04).then_some(all[0]);
            assert_eq!(tree.nearest_within(q, 0.2), near);
        }
    }

    #[test]
    fn handles_many_coplanar_duplicates() {
        let mut pts = vec![Point::new(0.5, 0.5, 0.0); 100];
        pts.extend((0..400).map(|i| Point::new((i % 20) as f64 * 0.01, (i / 20) as f64 * 0.01, 0.0)));
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(Point::new(0.5, 0.5, 0.1)).unwrap().0, 0);
        assert_eq!(tree.within(Point::new(0.5, 0.5, 0.0), 1e-9).len(), 100);
    }

    #[test]
    fn plane_fit_recovers_normal() {
        let pts: Vec<Point> = (0..50)
            .map(|i| Point::new((i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1, 2.0))
            .collect();
        let (n, var) = plane_fit(&pts).unwrap();
        assert!(n.z.abs() > 1.0 - 1e-9);
        assert!(var < 1e-12);
    }
}
