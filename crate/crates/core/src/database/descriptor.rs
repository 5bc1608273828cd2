//! Handcrafted shape descriptors and the spatial bag of words.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::spatial::{plane_fit, KdTree};

pub const SPIN_BINS: usize = 3;
pub const LOCAL_LEN: usize = SPIN_BINS * SPIN_BINS;
pub const DIST_BINS: usize = 16;
pub const DESCRIPTOR_LEN: usize = LOCAL_LEN + DIST_BINS;
/// Keypoints used for each normal estimate.
pub const NORMAL_NEIGHBORS: usize = 10;
/// Spin support radius of the global descriptor, as a fraction of diag.
pub const GLOBAL_SUPPORT: f64 = 0.25;
/// Spin support radius of the per-keypoint words, meters.
pub const LOCAL_SUPPORT: f64 = 0.15;
pub const HEIGHT_BANDS: usize = 8;
pub const BAND_HEIGHT: f64 = 0.25;
pub const SOFT_ASSIGN: usize = 3;

fn keypoint_normals(keypoints: &[Point], tree: &KdTree) -> Vec<Point> {
    keypoints
        .iter()
        .map(|k| {
            let nn: Vec<Point> = tree.k_nearest(*k, NORMAL_NEIGHBORS).iter().map(|(i, _)| keypoints[*i]).collect();
            plane_fit(&nn).map_or(Point::Z, |(n, _)| n)
        })
        .collect()
}

/// Unsigned spin histograms (radial distance from the normal axis versus
/// distance along it) of keypoint neighbours within `radius`. Rows are
/// normalized to sum 1; isolated keypoints get a zero row.
pub fn spin_histograms(keypoints: &[Point], radius: f64) -> Vec<[f64; LOCAL_LEN]> {
    let tree = KdTree::new(keypoints);
    let normals = keypoint_normals(keypoints, &tree);
    let b = SPIN_BINS as f64;
    keypoints
        .iter()
        .zip(&normals)
        .enumerate()
        .map(|(i, (k, n))| {
            let mut h = [0.0; LOCAL_LEN];
            let mut count = 0usize;
            if radius > 0.0 {
                for j in tree.within(*k, radius) {
                    if j == i {
                        continue;
                    }
                    let d = keypoints[j] - *k;
                    let beta = d.dot(*n);
                    let alpha = (d - *n * beta).norm();
                    let ai = ((alpha / radius * b) as usize).min(SPIN_BINS - 1);
                    let bi = ((beta.abs() / radius * b) as usize).min(SPIN_BINS - 1);
                    h[ai * SPIN_BINS + bi] += 1.0;
                    count += 1;
                }
            }
            if count > 0 {
                h.iter_mut().for_each(|v| *v /= count as f64);
            }
            h
        })
        .collect()
}

/// Global descriptor: pooled spin histograms followed by a histogram of
/// pairwise keypoint distances, both scaled by the cloud diagonal.
pub fn describe(cloud: &[Point], keypoints: &[Point]) -> Vec<f64> {
    let mut out = vec![0.0; DESCRIPTOR_LEN];
    let diag = crate::cloud::diag_of(cloud)
        .or_else(|_| crate::cloud::diag_of(keypoints))
        .unwrap_or(0.0);
    if keypoints.is_empty() || diag <= 0.0 {
        return out;
    }
    let spins = spin_histograms(keypoints, GLOBAL_SUPPORT * diag);
    let active = spins.iter().filter(|h| h.iter().sum::<f64>() > 0.0).count();
    if active > 0 {
        for h in &spins {
            for (o, v) in out.iter_mut().zip(h) {
                *o += v / active as f64;
            }
        }
    }
    let mut pairs = 0usize;
    for i in 0..keypoints.len() {
        for j in i + 1..keypoints.len() {
            let r = keypoints[i].dist(keypoints[j]) / diag;
            let bin = ((r * DIST_BINS as f64) as usize).min(DIST_BINS - 1);
            out[LOCAL_LEN + bin] += 1.0;
            pairs += 1;
        }
    }
    if pairs > 0 {
        out[LOCAL_LEN..].iter_mut().for_each(|v| *v /= pairs as f64);
    }
    out
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn sq_dist(a: &[f64; LOCAL_LEN], b: &[f64; LOCAL_LEN]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Visual-word centers over local spin descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centers: Vec<[f64; LOCAL_LEN]>,
}

impl Codebook {
    /// Lloyd's k-means with seeded distinct-sample initialization. Needs at
    /// least `k` descriptors.
    pub fn train(descriptors: &[[f64; LOCAL_LEN]], k: usize, seed: u64, max_iters: usize) -> Codebook {
        let k = k.min(descriptors.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers: Vec<[f64; LOCAL_LEN]> = sample(&mut rng, descriptors.len(), k).into_iter().map(|i| descriptors[i]).collect();
        let mut assign = vec![usize::MAX; descriptors.len()];
        for _ in 0..max_iters {
            let mut changed = false;
            for (d, a) in descriptors.iter().zip(assign.iter_mut()) {
                let best = nearest_center(&centers, d);
                if best != *a {
                    *a = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sum = vec![[0.0; LOCAL_LEN]; k];
            let mut count = vec![0usize; k];
            for (d, &a) in descriptors.iter().zip(&assign) {
                for (s, v) in sum[a].iter_mut().zip(d) {
                    *s += v;
                }
                count[a] += 1;
            }
            for c in 0..k {
                if count[c] > 0 {
                    for (x, s) in centers[c].iter_mut().zip(&sum[c]) {
                        *x = s / count[c] as f64;
                    }
                }
            }
        }
        Codebook { centers }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// The `n` nearest centers, ties to the smaller index.
    pub fn nearest(&self, d: &[f64; LOCAL_LEN], n: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = self.centers.iter().enumerate().map(|(i, c)| (sq_dist(c, d), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(n).map(|x| x.1).collect()
    }

    /// Spatially-sensitive bag of words: one word histogram per absolute
    /// height band, each keypoint soft-assigned to its nearest centers.
    /// Normalized to sum 1.
    pub fn bag_of_words(&self, keypoints: &[Point]) -> Vec<f64> {
        let k = self.len();
        let mut h = vec![0.0; k * HEIGHT_BANDS];
        if k == 0 || keypoints.is_empty() {
            return h;
        }
        let locals = spin_histograms(keypoints, LOCAL_SUPPORT);
        let n = SOFT_ASSIGN.min(k);
        for (p, d) in keypoints.iter().zip(&locals) {
            let band = ((p.z / BAND_HEIGHT).floor().max(0.0) as usize).min(HEIGHT_BANDS - 1);
            for c in self.nearest(d, n) {
                h[band * k + c] += 1.0 / n as f64;
            }
        }
        let total: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= total);
        h
    }
}

fn nearest_center(centers: &[[f64; LOCAL_LEN]], d: &[f64; LOCAL_LEN]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, c) in centers.iter().enumerate() {
        let dd = sq_dist(c, d);
        if dd < best.0 {
            best = (dd, i);
        }
    }
    best.1
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
