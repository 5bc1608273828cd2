//! Floor and wall extraction by RANSAC plane fitting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::spatial::plane_fit;

/// `normal · p = offset`, unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Point,
    pub offset: f64,
}

impl Plane {
    pub fn distance(&self, p: Point) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneParams {
    /// Half-width of the floor inlier band, meters.
    pub floor_band: f64,
    /// Largest angle between the floor normal and vertical, degrees.
    pub max_tilt_deg: f64,
    pub wall_band: f64,
    /// Smallest contiguous horizontal run a wall must span, meters.
    pub wall_min_length: f64,
    /// Smallest vertical span of a wall, meters.
    pub wall_min_height: f64,
    /// Gap that breaks a contiguous wall run, meters.
    pub wall_gap: f64,
    pub min_inliers: usize,
    pub iterations: usize,
    pub max_walls: usize,
}

impl Default for PlaneParams {
    fn default() -> Self {
        PlaneParams {
            floor_band: 0.03,
            max_tilt_deg: 5.0,
            wall_band: 0.06,
            wall_min_length: 2.0,
            wall_min_height: 1.2,
            wall_gap: 0.3,
            min_inliers: 100,
            iterations: 300,
            max_walls: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FloorWalls {
    pub floor: Option<Plane>,
    pub walls: Vec<Plane>,
    pub floor_points: Vec<usize>,
    pub wall_points: Vec<usize>,
    /// Everything else, ascending.
    pub remaining: Vec<usize>,
}

/// Up to ~4000 evenly strided candidates for hypothesis scoring.
fn stride_of(n: usize) -> usize {
    (n / 4000).max(1)
}

fn count_inliers(points: &[Point], pool: &[usize], plane: &Plane, band: f64, stride: usize) -> usize {
    pool.iter()
        .step_by(stride)
        .filter(|&&i| plane.distance(points[i]).abs() <= band)
        .count()
}

fn refine(points: &[Point], pool: &[usize], plane: Plane, band: f64) -> Option<Plane> {
    let inl: Vec<Point> = pool
        .iter()
        .map(|&i| points[i])
        .filter(|p| plane.distance(*p).abs() <= band)
        .collect();
    let (mut n, _) = plane_fit(&inl)?;
    if n.dot(plane.normal) < 0.0 {
        n = -n;
    }
    let c = crate::geometry::centroid(&inl)?;
    Some(Plane {
        normal: n,
        offset: n.dot(c),
    })
}

/// Longest horizontal run along `axis` without gaps wider than `gap`.
fn longest_run(mut coords: Vec<f64>, gap: f64) -> f64 {
    coords.sort_by(f64::total_cmp);
    let mut best = 0.0f64;
    let mut start = match coords.first() {
        Some(&c) => c,
        None => return 0.0,
    };
    for w in coords.windows(2) {
        if w[1] - w[0] > gap {
            start = w[1];
        }
        best = best.max(w[1] - start);
    }
    best
}

/// Splits `points` into floor, walls and the rest. The floor is the
/// horizontal plane (within `max_tilt_deg`) with the most inliers; walls are
/// near-vertical planes spanning at least `wall_min_length` by
/// `wall_min_height`. Deterministic for a given seed.
pub fn detect_floor_walls(points: &[Point], params: &PlaneParams, seed: u64) -> FloorWalls {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = FloorWalls::default();
    if n < 3 {
        out.remaining = pool;
        return out;
    }
    let max_tilt = params.max_tilt_deg.to_radians();

    let stride = stride_of(pool.len());
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..params.iterations {
        let [a, b, c] = [0, 1, 2].map(|_| points[pool[rng.random_range(0..pool.len())]]);
        let Some(mut nrm) = (b - a).cross(c - a).normalized() else { continue };
        if nrm.z < 0.0 {
            nrm = -nrm;
        }
        if nrm.z < max_tilt.cos() {
            continue;
        }
        let plane = Plane {
            normal: nrm,
            offset: nrm.dot(a),
        };
        let k = count_inliers(points, &pool, &plane, params.floor_band, stride);
        if best.is_none_or(|(bk, _)| k > bk) {
            best = Some((k, plane));
        }
    }
    if let Some(plane) = best.and_then(|(_, p)| refine(points, &pool, p, params.floor_band)) {
        let (inl, rest): (Vec<usize>, Vec<usize>) = pool
            .iter()
            .partition(|&&i| plane.distance(points[i]).abs() <= params.floor_band);
        if plane.normal.z >= max_tilt.cos() && inl.len() >= params.min_inliers {
            out.floor = Some(plane);
            out.floor_points = inl;
            pool = rest;
        }
    }

    let mut tested: Vec<usize> = Vec::new();
    let max_vertical = max_tilt.sin();
    for _ in 0..params.max_walls + 4 {
        if out.walls.len() >= params.max_walls {
            break;
        }
        let sample: Vec<usize> = pool.iter().copied().filter(|i| tested.binary_search(i).is_err()).collect();
        if sample.len() < params.min_inliers {
            break;
        }
        let stride = stride_of(pool.len());
        let mut best: Option<(usize, Plane)> = None;
        for _ in 0..params.iterations {
            let a = points[sample[rng.random_range(0..sample.len())]];
            let b = points[sample[rng.random_range(0..sample.len())]];
            let Some(nrm) = (b - a).horizontal().cross(Point::Z).normalized() else { continue };
            let plane = Plane {
                normal: nrm,
                offset: nrm.dot(a),
            };
            let k = count_inliers(points, &pool, &plane, params.wall_band, stride);
            if best.is_none_or(|(bk, _)| k > bk) {
                best = Some((k, plane));
            }
        }
        let Some(plane) = best.and_then(|(_, p)| refine(points, &pool, p, params.wall_band)) else { break };
        let inl: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&i| plane.distance(points[i]).abs() <= params.wall_band)
            .collect();
        let along = plane.normal.cross(Point::Z).normalized().unwrap_or(Point::X);
        let run = longest_run(inl.iter().map(|&i| points[i].dot(along)).collect(), params.wall_gap);
        let (zlo, zhi) = inl
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(points[i].z), hi.max(points[i].z)));
        let ok = plane.normal.z.abs() <= max_vertical
            && inl.len() >= params.min_inliers
            && run >= params.wall_min_length
            && zhi - zlo >= params.wall_min_height;
        if ok {
            out.walls.push(plane);
            out.wall_points.extend_from_slice(&inl);
            pool.retain(|i| inl.binary_search(i).is_err());
        } else {
            tested.extend_from_slice(&inl);
            tested.sort_unstable();
            tested.dedup();
        }
    }
    out.wall_points.sort_unstable();
    out.remaining = pool;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f: impl Fn(f64, f64) -> Point, n: usize, step: f64) -> Vec<Point> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push(f(i as f64 * step, j as f64 * step));
            }
        }
        v
    }

    #[test]
    fn floor_only() {
        let pts = grid(|x, y| Point::new(x, y, 0.0), 40, 0.05);
        let fw = detect_floor_walls(&pts, &PlaneParams::default(), 1);
        assert!(fw.floor.is_some());
        assert_eq!(fw.floor_points.len(), pts.len());
        assert!(fw.remaining.is_empty());
    }

    #[test]
    fn box_survives() {
        let mut pts = grid(|x, y| Point::new(x, y, 0.0), 40, 0.05);
        let n_floor = pts.len();
        pts.extend(grid(|x, y| Point::new(0.8 + x, 0.8 + y, 0.4), 8, 0.05));
        pts.extend(grid(|x, z| Point::new(0.8 + x, 0.8, 0.1 + z), 8, 0.04));
        let fw = detect_floor_walls(&pts, &PlaneParams::default(), 1);
        assert_eq!(fw.floor_points.len(), n_floor);
        assert_eq!(fw.remaining.len(), pts.len() - n_floor);
        assert!(fw.walls.is_empty());
    }

    #[test]
    fn tilted_plane_is_not_floor() {
        let t = 10f64.to_radians().tan();
        let pts = grid(|x, y| Point::new(x, y, x * t), 40, 0.05);
        let fw = detect_floor_walls(&pts, &PlaneParams::default(), 1);
        assert!(fw.floor.is_none());
        assert!(fw.floor_points.is_empty());
    }

    #[test]
    fn wall_is_found() {
        let mut pts = grid(|x, y| Point::new(x, y, 0.0), 60, 0.05);
        pts.extend(grid(|x, z| Point::new(x, 3.0, 0.05 + z * 0.7), 60, 0.05));
        let fw = detect_floor_walls(&pts, &PlaneParams::default(), 3);
        assert_eq!(fw.walls.len(), 1);
        assert!(fw.walls[0].normal.y.abs() > 0.99);
        assert!(fw.remaining.is_empty());
    }
}
