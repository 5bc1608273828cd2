//! Metrics over a whole episode: live curves while it runs and offline
//! evaluation of a finished result and trace.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Viewpoint};
use crate::error::Result;
use crate::evaluation::coverage::{CoverageReport, CoverageTracker, GtSurface, ObjectCoverage, COVERAGE_RESOLUTION};
use crate::evaluation::recognition::{recognition_metrics, Detection, MetricsReport};
use crate::evaluation::segmentation::{rand_index, GtLabeler};
use crate::geometry::Aabb;
use crate::orchestrator::episode::{CurveSample, Observer, ReconstructionResult, Snapshot};
use crate::orchestrator::trace::{EpisodeTrace, ScanKind, TraceEvent};
use crate::scanner::render::PreparedScene;
use crate::scanner::scene::Scene;

/// Ground-truth objects overlapping some detection with IoU at least
/// `iou_threshold`, ascending.
pub fn detected_objects(scene: &Scene, detections: &[Aabb], iou_threshold: f64) -> Vec<u32> {
    scene
        .objects
        .iter()
        .filter(|o| {
            o.world_aabb()
                .is_some_and(|b| detections.iter().any(|d| d.iou(&b) >= iou_threshold))
        })
        .map(|o| o.id)
        .collect()
}

/// Coverage of the ground-truth object a recognition landed on, taken at
/// the moment it was recognized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionCoverage {
    pub recognized: u32,
    pub step: usize,
    /// Best-overlapping ground-truth object, if any reaches the threshold.
    pub object: Option<u32>,
    pub coverage: Option<ObjectCoverage>,
}

fn best_overlap(scene: &Scene, b: &Aabb, iou_threshold: f64) -> Option<u32> {
    scene
        .objects
        .iter()
        .filter_map(|o| o.world_aabb().map(|g| (o.id, g.iou(b))))
        .filter(|(_, iou)| *iou >= iou_threshold)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
}

/// Observer recording coverage and Rand Index after every segmentation
/// pass, plus per-object coverage whenever something is recognized.
pub struct MetricsObserver<'s> {
    scene: &'s Scene,
    prepared: PreparedScene,
    pub tracker: CoverageTracker,
    labeler: GtLabeler,
    pub iou_threshold: f64,
    pub curves: Vec<CurveSample>,
    pub recognitions: Vec<RecognitionCoverage>,
}

impl<'s> MetricsObserver<'s> {
    pub fn new(scene: &'s Scene, camera: CameraModel, iou_threshold: f64) -> Result<Self> {
        Ok(MetricsObserver {
            scene,
            prepared: PreparedScene::from_scene(scene),
            tracker: CoverageTracker::new(GtSurface::from_scene(scene, COVERAGE_RESOLUTION)?, camera),
            labeler: GtLabeler::new(scene),
            iou_threshold,
            curves: Vec::new(),
            recognitions: Vec::new(),
        })
    }

    fn coverage(&self, detections: &[Aabb]) -> Result<CoverageReport> {
        if self.tracker.surface.is_empty() {
            return Ok(CoverageReport {
                r_cover: 0.0,
                q_cover: 0.0,
                per_object: Vec::new(),
            });
        }
        self.tracker
            .report(&detected_objects(self.scene, detections, self.iou_threshold))
    }
}

impl Observer for MetricsObserver<'_> {
    fn on_scan(&mut self, view: &Viewpoint, _kind: ScanKind) -> Result<()> {
        self.tracker.add_view(&self.prepared, view);
        Ok(())
    }

    fn on_segmentation(&mut self, s: &Snapshot) -> Result<()> {
        for r in s.recognized.iter().skip(self.recognitions.len()) {
            let object = best_overlap(self.scene, &r.aabb, self.iou_threshold);
            self.recognitions.push(RecognitionCoverage {
                recognized: r.id,
                step: s.step,
                object,
                coverage: object.map(|id| self.tracker.object_coverage(id)),
            });
        }
        let gt = self.labeler.label_all(s.points);
        let boxes: Vec<Aabb> = s.recognized.iter().map(|r| r.aabb).collect();
        let cov = self.coverage(&boxes)?;
        self.curves.push(CurveSample {
            step: s.step,
            nbv_scans: s.nbv_scans,
            rand_index: rand_index(&gt, s.labels).ok(),
            r_cover: cov.r_cover,
            q_cover: cov.q_cover,
        });
        Ok(())
    }
}

/// One coverage sample per executed scan, replayed from a trace: views
/// come from `scan` records and detections from `replacement` records.
pub fn coverage_curve(
    scene: &Scene,
    trace: &EpisodeTrace,
    camera: &CameraModel,
    iou_threshold: f64,
) -> Result<Vec<CurveSample>> {
    Ok(replay_coverage(scene, trace, camera, iou_threshold)?.0)
}

/// The per-scan curve and the final report.
fn replay_coverage(
    scene: &Scene,
    trace: &EpisodeTrace,
    camera: &CameraModel,
    iou_threshold: f64,
) -> Result<(Vec<CurveSample>, Option<CoverageReport>)> {
    let surface = GtSurface::from_scene(scene, COVERAGE_RESOLUTION)?;
    if surface.is_empty() {
        return Ok((Vec::new(), None));
    }
    let prepared = PreparedScene::from_scene(scene);
    let mut tracker = CoverageTracker::new(surface, *camera);
    let mut boxes = Vec::new();
    let mut nbv_scans = 0;
    let mut out = Vec::new();
    for e in &trace.events {
        match e {
            TraceEvent::Scan { step, kind, viewpoint, .. } => {
                tracker.add_view(&prepared, viewpoint);
                if matches!(kind, ScanKind::Nbv | ScanKind::Fallback) {
                    nbv_scans += 1;
                }
                let cov = tracker.report(&detected_objects(scene, &boxes, iou_threshold))?;
                out.push(CurveSample {
                    step: *step,
                    nbv_scans,
                    rand_index: None,
                    r_cover: cov.r_cover,
                    q_cover: cov.q_cover,
                });
            }
            TraceEvent::Replacement { aabb, .. } => {
                boxes.push(*aabb);
                if let Some(last) = out.last_mut() {
                    let cov = tracker.report(&detected_objects(scene, &boxes, iou_threshold))?;
                    last.r_cover = cov.r_cover;
                    last.q_cover = cov.q_cover;
                }
            }
            _ => {}
        }
    }
    let report = tracker.report(&detected_objects(scene, &boxes, iou_threshold))?;
    Ok((out, Some(report)))
}

/// Everything `eval` reports for one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvaluation {
    pub recognition: MetricsReport,
    pub coverage: Option<CoverageReport>,
    /// Final Rand Index, when the result carries per-step samples.
    pub rand_index: Option<f64>,
    pub nbo_count: usize,
    pub scans: usize,
    pub nbv_scans: usize,
    pub total_travel: f64,
    pub coverage_curve: Vec<CurveSample>,
    pub segmentation_curve: Vec<CurveSample>,
}

pub fn evaluate_episode(
    scene: &Scene,
    result: &ReconstructionResult,
    trace: &EpisodeTrace,
    camera: &CameraModel,
    iou_threshold: f64,
) -> Result<EpisodeEvaluation> {
    let dets: Vec<Detection> = result
        .recognized
        .iter()
        .map(|r| Detection {
            label: r.label.clone(),
            aabb: r.aabb,
        })
        .collect();
    let recognition = recognition_metrics(&dets, scene, iou_threshold);
    let (coverage_curve, coverage) = replay_coverage(scene, trace, camera, iou_threshold)?;
    Ok(EpisodeEvaluation {
        recognition,
        coverage,
        rand_index: result.curves.iter().rev().find_map(|c| c.rand_index),
        nbo_count: result.nbo_count,
        scans: result.scans,
        nbv_scans: result.nbv_scans,
        total_travel: result.total_travel,
        coverage_curve,
        segmentation_curve: result.curves.clone(),
    })
}
