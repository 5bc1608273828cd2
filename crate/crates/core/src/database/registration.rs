//! Upright rigid registration of a model's keypoints onto a query: yaw
//! about +z plus a horizontal translation. Both clouds stand on the same
//! floor, so height is left untouched.

use crate::geometry::{centroid, Point, Pose};
use crate::spatial::KdTree;

pub const YAW_STEPS: usize = 36;
const COARSE_SAMPLES: usize = 64;
const ICP_SAMPLES: usize = 200;
const ICP_ITERS: usize = 20;
const ICP_SEEDS: usize = 3;

fn stride_sample(points: &[Point], n: usize) -> Vec<Point> {
    let step = (points.len() / n.max(1)).max(1);
    points.iter().step_by(step).copied().collect()
}

/// Mean squared distance from `query` to the model tree after mapping the
/// query into the model frame with `inv`.
fn score(query: &[Point], model: &KdTree, inv: &Pose) -> f64 {
    query.iter().map(|q| model.nearest(inv.apply(*q)).map_or(0.0, |x| x.1)).sum::<f64>() / query.len() as f64
}

/// Yaw grid plus ICP refinement. `objective(pose)` ranks the refined
/// candidates; the lowest wins (earliest on ties).
pub fn register(
    query: &[Point],
    model: &[Point],
    model_tree: &KdTree,
    mut objective: impl FnMut(&Pose) -> f64,
) -> Pose {
    let (Some(cq), Some(cm)) = (centroid(query), centroid(model)) else {
        return Pose::IDENTITY;
    };
    let coarse = stride_sample(query, COARSE_SAMPLES);
    let mut seeds: Vec<(f64, usize, Pose)> = (0..YAW_STEPS)
        .map(|k| {
            let yaw = std::f64::consts::TAU * k as f64 / YAW_STEPS as f64;
            let rc = cm.rotate_z(yaw);
            let pose = Pose::new(Point::new(cq.x - rc.x, cq.y - rc.y, 0.0), yaw, 1.0);
            (score(&coarse, model_tree, &pose.inverse()), k, pose)
        })
        .collect();
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let fine = stride_sample(query, ICP_SAMPLES);
    let mut best: Option<(f64, Pose)> = None;
    for (_, _, seed) in seeds.into_iter().take(ICP_SEEDS) {
        let pose = icp(&fine, model, model_tree, seed);
        let v = objective(&pose);
        if best.is_none_or(|b| v < b.0) {
            best = Some((v, pose));
        }
    }
    best.map(|b| b.1).unwrap_or(Pose::IDENTITY)
}

/// Point-to-point ICP restricted to yaw and horizontal translation.
pub fn icp(query: &[Point], model: &[Point], model_tree: &KdTree, init: Pose) -> Pose {
    let mut pose = init;
    for _ in 0..ICP_ITERS {
        let inv = pose.inverse();
        // Pairs (query point, matched model point in world frame).
        let pairs: Vec<(Point, Point)> = query
            .iter()
            .filter_map(|q| model_tree.nearest(inv.apply(*q)).map(|(i, _)| (*q, pose.apply(model[i]))))
            .collect();
        if pairs.is_empty() {
            break;
        }
        let n = pairs.len() as f64;
        let (mut qc, mut mc) = (Point::ZERO, Point::ZERO);
        for (q, m) in &pairs {
            qc += *q;
            mc += *m;
        }
        qc = qc / n;
        mc = mc / n;
        let (mut sin, mut cos) = (0.0, 0.0);
        for (q, m) in &pairs {
            let (a, b) = (*m - mc, *q - qc);
            sin += a.x * b.y - a.y * b.x;
            cos += a.x * b.x + a.y * b.y;
        }
        let dyaw = sin.atan2(cos);
        let rmc = mc.rotate_z(dyaw);
        let step = Pose::new(Point::new(qc.x - rmc.x, qc.y - rmc.y, 0.0), dyaw, 1.0);
        let next = step.compose(&pose);
        let moved = next.translation.dist(pose.translation) + (next.yaw - pose.yaw).abs();
        pose = next;
        if moved < 1e-9 {
            break;
        }
    }
    pose
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::keypoints::sample_keypoints;
    use crate::scanner::mesh::TriangleMesh;

    fn chairish() -> Vec<Point> {
        let mut m = TriangleMesh::new();
        m.add_box(Point::new(-0.3, -0.3, 0.4), Point::new(0.3, 0.3, 0.45));
        m.add_box(Point::new(-0.3, 0.26, 0.45), Point::new(0.3, 0.3, 1.0));
        m.add_box(Point::new(-0.3, -0.3, 0.0), Point::new(-0.26, -0.26, 0.4));
        m.sample_surface(0.02).into_iter().map(|x| x.0).collect()
    }

    #[test]
    fn recovers_planted_pose() {
        let model = sample_keypoints(&chairish(), 300, 0);
        let truth = Pose::new(Point::new(2.0, -1.0, 0.0), 1.1, 1.0);
        let query = truth.transform_all(&model);
        let tree = KdTree::new(&model);
        let qtree = KdTree::new(&query);
        let pose = register(&query, &model, &tree, |p| {
            model.iter().map(|m| qtree.nearest(p.apply(*m)).unwrap().1).sum::<f64>()
        });
        assert!(pose.translation.dist(truth.translation) < 1e-6, "{pose:?}");
        assert!(crate::geometry::wrap_angle(pose.yaw - truth.yaw).abs() < 1e-6);
    }

    #[test]
    fn identical_sets_register_to_identity() {
        let model = sample_keypoints(&chairish(), 300, 0);
        let tree = KdTree::new(&model);
        let pose = register(&model, &model, &tree, |_| 0.0);
        assert_eq!(pose.apply(model[5]), model[5]);
    }
}
