use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point;
use crate::spatial::KdTree;

pub const LLOYD_MAX_ITERS: usize = 50;
pub const LLOYD_TOL: f64 = 1e-6;
/// Clouds larger than this run Lloyd's iterations on a seeded random subset;
/// centroids are still snapped to the full cloud.
pub const LLOYD_MAX_POINTS: usize = 6000;

/// `min(n_p, |cloud|)` distinct cloud points spread uniformly over the
/// cloud: Lloyd's k-means centroids snapped to their nearest unused point.
pub fn sample_keypoints(cloud: &[Point], n_p: usize, seed: u64) -> Vec<Point> {
    sample_keypoint_indices(cloud, n_p, seed).into_iter().map(|i| cloud[i]).collect()
}

pub fn sample_keypoint_indices(cloud: &[Point], n_p: usize, seed: u64) -> Vec<usize> {
    if cloud.len() <= n_p {
        return (0..cloud.len()).collect();
    }
    if n_p == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let work: Vec<Point> = if cloud.len() > LLOYD_MAX_POINTS {
        let mut idx = sample(&mut rng, cloud.len(), LLOYD_MAX_POINTS).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cloud[i]).collect()
    } else {
        cloud.to_vec()
    };
    let mut centers: Vec<Point> = sample(&mut rng, work.len(), n_p).into_iter().map(|i| work[i]).collect();
    for _ in 0..LLOYD_MAX_ITERS {
        let tree = KdTree::new(&centers);
        let mut sum = vec![Point::ZERO; n_p];
        let mut count = vec![0usize; n_p];
        for p in &work {
            let (c, _) = tree.nearest(*p).expect("centers non-empty");
            sum[c] += *p;
            count[c] += 1;
        }
        let mut motion = 0.0f64;
        for c in 0..n_p {
            if count[c] > 0 {
                let next = sum[c] / count[c] as f64;
                motion = motion.max(next.dist(centers[c]));
                centers[c] = next;
            }
        }
        if motion < LLOYD_TOL {
            break;
        }
    }
    snap_distinct(cloud, &centers)
}

/// Each center, in order, takes its nearest cloud point not already taken.
fn snap_distinct(cloud: &[Point], centers: &[Point]) -> Vec<usize> {
    let tree = KdTree::new(cloud);
    let mut used = vec![false; cloud.len()];
    let mut out = Vec::with_capacity(centers.len());
    for c in centers {
        let mut k = 4;
        loop {
            let nn = tree.k_nearest(*c, k);
            if let Some(&(i, _)) = nn.iter().find(|(i, _)| !used[*i]) {
                used[i] = true;
                out.push(i);
                break;
            }
            if k >= cloud.len() {
                break;
            }
            k = (k * 4).min(cloud.len());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn saturates_on_small_clouds() {
        let pts = vec![Point::X, Point::Y, Point::Z];
        assert_eq!(sample_keypoints(&pts, 500, 0), pts);
    }

    #[test]
    fn exact_count_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> = (0..10_000)
            .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>(), 0.0))
            .collect();
        let idx = sample_keypoint_indices(&pts, 500, 1);
        assert_eq!(idx.len(), 500);
        let mut s = idx.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 500);
        assert_eq!(idx, sample_keypoint_indices(&pts, 500, 1));
    }

    #[test]
    fn separated_clusters_get_one_keypoint_each() {
        // Exhaustive 2-means oracle: the best split of the points.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let mut pts = Vec::new();
            for k in 0..2 {
                for _ in 0..8 {
                    pts.push(Point::new(
                        k as f64 * 10.0 + rng.random::<f64>(),
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                    ));
                }
            }
            let n = pts.len();
            let mut best = (f64::INFINITY, 0u32);
            for mask in 1..(1u32 << n) - 1 {
                let cost: f64 = [true, false]
                    .iter()
                    .map(|&side| {
                        let g: Vec<Point> = (0..n).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| pts[i]).collect();
                        let c = crate::geometry::centroid(&g).unwrap();
                        g.iter().map(|p| p.dist_sq(c)).sum::<f64>()
                    })
                    .sum();
                if cost < best.0 {
                    best = (cost, mask);
                }
            }
            let kp = sample_keypoint_indices(&pts, 2, trial);
            let side = |i: usize| best.1 >> i & 1 == 1;
            assert_ne!(side(kp[0]), side(kp[1]), "trial {trial}");
        }
    }
}
