use std::collections::BTreeSet;

use crate::geometry::Point;
use crate::spatial::KdTree;

/// Unordered pairs `(a, b)`, `a < b`, of point sets with some points
/// within `radius` of each other. Sorted ascending.
pub fn adjacent_pairs(sets: &[Vec<Point>], radius: f64) -> Vec<(usize, usize)> {
    let mut owner = Vec::new();
    let mut points = Vec::new();
    for (s, pts) in sets.iter().enumerate() {
        for p in pts {
            owner.push(s);
            points.push(*p);
        }
    }
    let tree = KdTree::new(&points);
    let mut edges = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        for j in tree.within(*p, radius) {
            let (a, b) = (owner[i], owner[j]);
            if a < b {
                edges.insert((a, b));
            }
        }
    }
    edges.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(x: f64) -> Vec<Point> {
        (0..10).map(|i| Point::new(x + i as f64 * 0.01, 0.0, 0.0)).collect()
    }

    #[test]
    fn touching_and_far() {
        let r = 0.03;
        assert_eq!(adjacent_pairs(&[blob(0.0), blob(0.1)], r), vec![(0, 1)]);
        assert!(adjacent_pairs(&[blob(0.0), blob(0.09 + 10.0 * r)], r).is_empty());
        assert_eq!(adjacent_pairs(&[blob(0.0), blob(0.1), blob(0.2)], r), vec![(0, 1), (1, 2)]);
    }
}
