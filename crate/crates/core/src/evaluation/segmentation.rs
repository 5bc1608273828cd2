//! Rand Index and ground-truth label transfer.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scanner::scene::Scene;
use crate::spatial::KdTree;

/// Maximum distance for a reconstructed point to inherit a ground-truth
/// object label, meters.
pub const TRANSFER_RADIUS: f64 = 0.03;

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Fraction of point pairs on which two labelings agree (grouped together
/// in both or apart in both). Points unassigned in either labeling are
/// left out.
pub fn rand_index(a: &[Option<u32>], b: &[Option<u32>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut joint: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
    let mut n = 0u64;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            *joint.entry((*x, *y)).or_default() += 1;
            *rows.entry(*x).or_default() += 1;
            *cols.entry(*y).or_default() += 1;
            n += 1;
        }
    }
    if n < 2 {
        return Err(Error::InvalidParameter("Rand Index needs at least two labeled points".into()));
    }
    let both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let in_a: u64 = rows.values().map(|&c| pairs(c)).sum();
    let in_b: u64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    let agree = total + 2 * both - in_a - in_b;
    Ok(agree as f64 / total as f64)
}

/// Nearest ground-truth object lookup over dense surface samples.
#[derive(Clone, Debug)]
pub struct GtLabeler {
    tree: Option<KdTree>,
    owner: Vec<u32>,
}

impl GtLabeler {
    pub fn new(scene: &Scene) -> GtLabeler {
        let mut samples = Vec::new();
        let mut owner = Vec::new();
        for o in &scene.objects {
            for (p, _) in o.world_geometry().sample_surface(0.005) {
                samples.push(p);
                owner.push(o.id);
            }
        }
        GtLabeler {
            tree: (!samples.is_empty()).then(|| KdTree::new(&samples)),
            owner,
        }
    }

    /// The object whose surface lies within [`TRANSFER_RADIUS`] of `p`,
    /// nearest first.
    pub fn label(&self, p: Point) -> Option<u32> {
        let (j, _) = self.tree.as_ref()?.nearest_within(p, TRANSFER_RADIUS)?;
        Some(self.owner[j])
    }

    pub fn label_all(&self, points: &[Point]) -> Vec<Option<u32>> {
        points.iter().map(|p| self.label(*p)).collect()
    }
}

/// Labels each point with the ground-truth object whose surface lies
/// within [`TRANSFER_RADIUS`], nearest first; `None` otherwise.
pub fn transfer_gt_segmentation(points: &[Point], scene: &Scene) -> Vec<Option<u32>> {
    GtLabeler::new(scene).label_all(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(v: &[u32]) -> Vec<Option<u32>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(rand_index(&l(&[0, 0, 1, 2]), &l(&[0, 0, 1, 2])).unwrap(), 1.0);
        assert_eq!(rand_index(&l(&[0, 0, 0]), &l(&[0, 1, 2])).unwrap(), 0.0);
        // Pairs agreeing: (1,2) together in both; (1,4), (2,4) apart in both.
        assert_eq!(rand_index(&l(&[0, 0, 1, 1]), &l(&[0, 0, 0, 1])).unwrap(), 0.5);
        assert!(rand_index(&l(&[0]), &l(&[0, 1])).is_err());
    }

    #[test]
    fn unassigned_points_are_skipped() {
        let a = vec![Some(0), Some(0), None, Some(1)];
        let b = vec![Some(5), Some(5), Some(5), Some(6)];
        assert_eq!(rand_index(&a, &b).unwrap(), 1.0);
    }
}
