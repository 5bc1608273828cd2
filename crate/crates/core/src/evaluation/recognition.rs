//! Recognition recall and precision against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::scanner::scene::Scene;

pub const DEFAULT_IOU: f64 = 0.25;

/// A recognized object as seen by the evaluator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub aabb: Aabb,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub ground_truth: usize,
    pub detected: usize,
    pub true_positives: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub recall: f64,
    pub precision: f64,
    /// Nothing was detected, so precision is reported as 1.
    pub precision_undefined: bool,
    pub true_positives: usize,
}

impl Rates {
    fn new(tp: usize, n_gt: usize, n_det: usize) -> Rates {
        Rates {
            recall: if n_gt == 0 { 1.0 } else { tp as f64 / n_gt as f64 },
            precision: if n_det == 0 { 1.0 } else { tp as f64 / n_det as f64 },
            precision_undefined: n_det == 0,
            true_positives: tp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub all: Rates,
    /// Restricted to floor-supported ground truth and detections.
    pub ground: Rates,
    pub per_class: BTreeMap<String, ClassCounts>,
    /// Ground-truth object id matched by each detection.
    pub matches: Vec<Option<u32>>,
}

/// One-to-one greedy matching by decreasing IoU among label-compatible
/// pairs reaching `iou_threshold`. Returns the matched ground-truth index
/// per detection.
pub fn greedy_match(dets: &[Detection], gt: &[(String, Aabb)], iou_threshold: f64) -> Vec<Option<usize>> {
    let mut pairs = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        for (j, (label, b)) in gt.iter().enumerate() {
            let iou = d.aabb.iou(b);
            if *label == d.label && iou >= iou_threshold {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![None; dets.len()];
    let mut gt_used = vec![false; gt.len()];
    for (_, i, j) in pairs {
        if det_used[i].is_none() && !gt_used[j] {
            det_used[i] = Some(j);
            gt_used[j] = true;
        }
    }
    det_used
}

pub fn recognition_metrics(dets: &[Detection], scene: &Scene, iou_threshold: f64) -> MetricsReport {
    let gt: Vec<(String, Aabb, u32, bool)> = scene
        .objects
        .iter()
        .filter_map(|o| {
            o.world_aabb()
                .map(|b| (o.label.clone(), b, o.id, o.on_floor(scene.floor.height)))
        })
        .collect();
    let gt_boxes: Vec<(String, Aabb)> = gt.iter().map(|g| (g.0.clone(), g.1)).collect();
    let m = greedy_match(dets, &gt_boxes, iou_threshold);
    let tp = m.iter().filter(|x| x.is_some()).count();
    let all = Rates::new(tp, gt.len(), dets.len());

    let floor = scene.floor.height;
    let det_ground: Vec<bool> = dets.iter().map(|d| d.aabb.min.z - floor < 0.05).collect();
    let n_gt_ground = gt.iter().filter(|g| g.3).count();
    let n_det_ground = det_ground.iter().filter(|&&g| g).count();
    let tp_ground = m
        .iter()
        .zip(&det_ground)
        .filter(|(x, g)| **g && x.is_some_and(|j| gt[j].3))
        .count();
    let ground = Rates::new(tp_ground, n_gt_ground, n_det_ground);

    let mut per_class: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for g in &gt {
        per_class.entry(g.0.clone()).or_default().ground_truth += 1;
    }
    for (d, x) in dets.iter().zip(&m) {
        let c = per_class.entry(d.label.clone()).or_default();
        c.detected += 1;
        if x.is_some() {
            c.true_positives += 1;
        }
    }
    MetricsReport {
        all,
        ground,
        per_class,
        matches: m.into_iter().map(|x| x.map(|j| gt[j].2)).collect(),
    }
}
