//! The scan, segment, NBO, NBV loop.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::cloud::PointCloud;
use crate::database::cache::RetrievalCache;
use crate::database::Database;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point, Pose};
use crate::orchestrator::config::Config;
use crate::orchestrator::planes::detect_floor_walls;
use crate::orchestrator::trace::{
    EpisodeTrace, ObjectState, ObjectSummary, ScanKind, TerminationReason, TraceEvent, TraceRecorder,
};
use crate::planning::align::{field_of, object_grid};
use crate::planning::gain::{priors, select_nbv};
use crate::planning::nbo::select_nbo;
use crate::planning::{
    align_candidates, conditional_info_gain, fallback_views, frontier_target, plan_path, sample_viewpoints,
    FloorMap, Grid2, NavGrid, NavPath, NboInput, RobotState, ViewCandidate, REVISIT_RADIUS,
};
use crate::scanner::render::{add_noise, depth_to_cloud, render_prepared, PreparedScene};
use crate::scanner::scene::Scene;
use crate::scanner::ObservedSurface;
use crate::segmentation::presegment::presegment;
use crate::segmentation::{post_segment, Component, ComponentGraph, SegmentedObject};
use crate::spatial::KdTree;
use crate::voxel::{visible_from, ScalarField, VoxelGrid};

/// A database model placed in the reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizedObject {
    pub id: u32,
    pub entry: u32,
    pub model_id: String,
    pub label: String,
    /// Model frame to world.
    pub pose: Pose,
    pub aabb: Aabb,
    pub objectness: f64,
    /// NBV scans spent on it as the object of interest.
    pub nbv_count: usize,
    /// Scans fused when it was recognized.
    pub step: usize,
    pub points: usize,
}

/// Geometry left unrecognized at the end of the episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualObject {
    pub label: String,
    pub points: usize,
    pub objectness: f64,
    pub state: ObjectState,
    pub aabb: Option<Aabb>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OoiOutcome {
    Recognized(u32),
    Abandoned,
    /// Its points merged away or vanished from the segmentation.
    Lost,
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OoiRecord {
    pub ooi: u32,
    pub nbv_count: usize,
    pub outcome: OoiOutcome,
}

/// Per-step evaluation sample recorded by an [`Observer`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub step: usize,
    pub nbv_scans: usize,
    pub rand_index: Option<f64>,
    pub r_cover: f64,
    pub q_cover: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub recognized: Vec<RecognizedObject>,
    pub unrecognized: Vec<ResidualObject>,
    pub nbo_count: usize,
    pub oois: Vec<OoiRecord>,
    pub total_travel: f64,
    pub scans: usize,
    pub nbv_scans: usize,
    pub floor_found: bool,
    /// Some target stayed unreachable.
    pub partial: bool,
    /// Points left in the observed surface.
    pub surface_points: usize,
    /// Points moved out of the surface by replacements.
    pub replaced_points: usize,
    /// Per-step evaluation samples; empty unless an observer recorded them.
    #[serde(default)]
    pub curves: Vec<CurveSample>,
}

/// Segmentation state handed to observers after each pass.
pub struct Snapshot<'a> {
    pub step: usize,
    pub nbv_scans: usize,
    /// Segmented points: live objects followed by replaced points.
    pub points: &'a [Point],
    /// Segment of each point; replaced points carry `REPLACED_LABEL + id`.
    pub labels: &'a [Option<u32>],
    pub recognized: &'a [RecognizedObject],
}

pub const REPLACED_LABEL: u32 = 1 << 24;

/// Hooks for metrics computed while the episode runs.
pub trait Observer {
    fn on_scan(&mut self, _view: &Viewpoint, _kind: ScanKind) -> Result<()> {
        Ok(())
    }

    fn on_segmentation(&mut self, _snapshot: &Snapshot) -> Result<()> {
        Ok(())
    }
}

pub fn classify_object_state(r: &SegmentedObject, cfg: &Config) -> ObjectState {
    if r.objectness > cfg.complete_threshold {
        ObjectState::Complete
    } else if r.objectness < cfg.noise_threshold && r.cloud.len() < cfg.noise_max_points {
        ObjectState::Noise
    } else {
        ObjectState::InProgress
    }
}

/// Places the best full-model candidate of `r` into `s` and moves the
/// points with stable ids `ids` from `t` into `archive`. Returns the new
/// object, or `None` when `r` has no candidate.
pub fn replace_with_model(
    s: &mut Vec<RecognizedObject>,
    t: &mut ObservedSurface,
    archive: &mut PointCloud,
    r: &SegmentedObject,
    ids: &[u64],
    db: &Database,
    step: usize,
) -> Option<RecognizedObject> {
    let best = r.similar.best()?;
    let entry = db.entry(best.entry);
    let aabb = Aabb::from_points(&best.pose.transform_all(&entry.cloud.points))?;
    let wanted: HashSet<u64> = ids.iter().copied().collect();
    let indices: Vec<usize> = (0..t.len()).filter(|&i| wanted.contains(&t.ids[i])).collect();
    archive.extend(&t.cloud.select(&indices));
    t.remove(&indices);
    let rec = RecognizedObject {
        id: s.len() as u32,
        entry: best.entry,
        model_id: entry.model_id.clone(),
        label: db.label_name(entry.label).to_string(),
        pose: best.pose,
        aabb,
        objectness: r.objectness,
        nbv_count: 0,
        step,
        points: indices.len(),
    };
    s.push(rec.clone());
    Some(rec)
}

struct Ooi {
    id: u32,
    ids: HashSet<u64>,
    nbv: usize,
}

struct Pass {
    objects: Vec<SegmentedObject>,
    states: Vec<ObjectState>,
    /// Stable ids of each object's points.
    object_ids: Vec<Vec<u64>>,
    floor_height: f64,
    /// Non-floor points that are not part of a live object.
    structure: Vec<Point>,
}

struct Episode<'a, 'w, 'o> {
    scene: &'a Scene,
    db: &'a Database,
    cfg: &'a Config,
    prepared: PreparedScene,
    t: ObservedSurface,
    archive: PointCloud,
    archive_labels: Vec<u32>,
    recognized: Vec<RecognizedObject>,
    /// Inflated boxes of replaced models.
    replaced_boxes: Vec<Aabb>,
    cache: RetrievalCache,
    robot: RobotState,
    floor_map: FloorMap,
    attempted_frontiers: Vec<Point>,
    abandoned: HashSet<u64>,
    ooi: Option<Ooi>,
    oois: Vec<OoiRecord>,
    next_ooi: u32,
    nbo_count: usize,
    nbv_scans: usize,
    frontier_visits: usize,
    partial: bool,
    floor_found: bool,
    max_steps: usize,
    rec: TraceRecorder<'w>,
    observer: Option<&'w mut (dyn Observer + 'o)>,
    residual: Vec<ResidualObject>,
}

fn scan_seed(seed: u64, scan: usize) -> u64 {
    seed ^ (scan as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl<'a, 'w, 'o> Episode<'a, 'w, 'o> {
    fn step(&self) -> usize {
        self.t.scan_count()
    }

    fn scan(&mut self, view: Viewpoint, kind: ScanKind) -> Result<()> {
        if self.step() >= self.max_steps {
            return Err(Error::StepBudgetExceeded(self.max_steps));
        }
        let img = render_prepared(&self.prepared, &view, &self.cfg.camera);
        let noisy = add_noise(&img, self.cfg.noise_sigma_rel, scan_seed(self.cfg.seed, self.step()))?;
        let cloud = depth_to_cloud(&noisy);
        let keep: Vec<usize> = (0..cloud.len())
            .filter(|&i| !self.replaced_boxes.iter().any(|b| b.contains(cloud.points[i])))
            .collect();
        let diverted = cloud.len() - keep.len();
        let fused = self.t.fuse(&cloud.select(&keep), view.position).len();
        if kind == ScanKind::Nbv || kind == ScanKind::Fallback {
            self.nbv_scans += 1;
        }
        self.rec.push(TraceEvent::Scan {
            step: self.step(),
            kind,
            viewpoint: view,
            valid_pixels: noisy.valid_count(),
            fused,
            diverted,
            surface_points: self.t.len(),
        })?;
        if let Some(o) = self.observer.as_mut() {
            o.on_scan(&view, kind)?;
        }
        Ok(())
    }

    /// Floor/wall removal, pre-segmentation and post-segmentation of T.
    fn segment(&mut self) -> Result<Pass> {
        let cfg = self.cfg;
        let step = self.step();
        let pts = self.t.points().to_vec();
        let fw = detect_floor_walls(&pts, &cfg.planes, cfg.seed ^ step as u64);
        let floor_height = fw.floor.map_or(self.scene.floor.height, |p| p.offset / p.normal.z);
        for &i in &fw.floor_points {
            self.floor_map.observe(pts[i]);
        }
        let sub = self.t.cloud.select(&fw.remaining);
        let groups: Vec<Vec<usize>> = presegment(&sub, &self.t.scan_origins, &cfg.preseg)
            .into_iter()
            .map(|g| g.into_iter().map(|i| fw.remaining[i]).collect())
            .collect();
        let (mut big, small): (Vec<Vec<usize>>, Vec<Vec<usize>>) =
            groups.into_iter().partition(|g| g.len() >= cfg.min_component_points);
        let mut dropped = Vec::new();
        if !big.is_empty() {
            let mut owner = Vec::new();
            let mut big_pts = Vec::new();
            for (k, g) in big.iter().enumerate() {
                for &i in g {
                    big_pts.push(pts[i]);
                    owner.push(k);
                }
            }
            let tree = KdTree::new(&big_pts);
            let mut joins: Vec<(usize, Vec<usize>)> = Vec::new();
            for g in small {
                let near = g
                    .iter()
                    .filter_map(|&i| tree.nearest_within(pts[i], cfg.adjacency_radius))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                match near {
                    Some((j, _)) => joins.push((owner[j], g)),
                    None => dropped.extend(g),
                }
            }
            for (k, g) in joins {
                big[k].extend(g);
            }
        } else {
            dropped.extend(small.into_iter().flatten());
        }
        for g in &mut big {
            g.sort_unstable();
        }
        let components: Vec<Component> = big
            .into_iter()
            .enumerate()
            .map(|(k, g)| Component::new(k as u32, &self.t.cloud, g, self.db, cfg.n_s, &mut self.cache))
            .collect();
        self.rec.push(TraceEvent::Presegment {
            step,
            surface_points: pts.len(),
            floor_points: fw.floor_points.len(),
            wall_points: fw.wall_points.len(),
            floor_found: fw.floor.is_some(),
            components: components.len(),
            dropped_points: dropped.len(),
        })?;
        let graph = ComponentGraph::build(components, cfg.adjacency_radius, self.db, cfg.n_s, &mut self.cache);
        let (labeling, objects) = post_segment(&graph, &self.t.cloud, self.db, cfg.n_s, &mut self.cache)?;
        let states: Vec<ObjectState> = objects.iter().map(|r| classify_object_state(r, cfg)).collect();
        self.rec.push(TraceEvent::Postsegment {
            step,
            energy: labeling.energy,
            objects: objects
                .iter()
                .zip(&states)
                .map(|(r, s)| ObjectSummary {
                    id: r.id,
                    label: self.db.label_name(r.label).to_string(),
                    points: r.cloud.len(),
                    objectness: r.objectness,
                    state: *s,
                    components: r.components.clone(),
                })
                .collect(),
        })?;
        let object_ids = objects
            .iter()
            .map(|r| r.indices.iter().map(|&i| self.t.ids[i]).collect())
            .collect();
        let mut structure: Vec<Point> = fw.wall_points.iter().map(|&i| pts[i]).collect();
        structure.extend(dropped.iter().map(|&i| pts[i]));
        if fw.floor.is_none() && self.floor_found {
            self.rec.push(TraceEvent::Warning {
                step,
                message: "floor plane lost".into(),
            })?;
        }
        self.floor_found |= fw.floor.is_some();
        Ok(Pass {
            objects,
            states,
            object_ids,
            floor_height,
            structure,
        })
    }

    /// Replaces every complete object. Returns the recognized id per object.
    fn replace_completes(&mut self, pass: &Pass) -> Result<Vec<Option<u32>>> {
        let mut out = vec![None; pass.objects.len()];
        for (k, r) in pass.objects.iter().enumerate() {
            if pass.states[k] != ObjectState::Complete {
                continue;
            }
            let step = self.step();
            let Some(rec) = replace_with_model(
                &mut self.recognized,
                &mut self.t,
                &mut self.archive,
                r,
                &pass.object_ids[k],
                self.db,
                step,
            ) else {
                continue;
            };
            self.archive_labels.extend(std::iter::repeat_n(rec.id, rec.points));
            let margin = self.cfg.replacement_margin;
            let grown = Aabb::from_points(&r.cloud.points).map_or(rec.aabb, |b| b.union(&rec.aabb));
            self.replaced_boxes.push(grown.expanded(margin));
            self.rec.push(TraceEvent::Replacement {
                step,
                object: r.id,
                recognized: rec.id,
                entry: rec.entry,
                model_id: rec.model_id.clone(),
                label: rec.label.clone(),
                pose: rec.pose,
                aabb: rec.aabb,
                objectness: rec.objectness,
                points_removed: rec.points,
            })?;
            out[k] = Some(rec.id);
        }
        Ok(out)
    }

    fn notify(&mut self, pass: &Pass, replaced: &[Option<u32>]) -> Result<()> {
        let Some(obs) = self.observer.as_mut() else { return Ok(()) };
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (k, r) in pass.objects.iter().enumerate() {
            if replaced[k].is_none() {
                points.extend_from_slice(&r.cloud.points);
                labels.extend(std::iter::repeat_n(Some(r.id), r.cloud.len()));
            }
        }
        points.extend_from_slice(&self.archive.points);
        labels.extend(self.archive_labels.iter().map(|&id| Some(REPLACED_LABEL + id)));
        obs.on_segmentation(&Snapshot {
            step: self.t.scan_count(),
            nbv_scans: self.nbv_scans,
            points: &points,
            labels: &labels,
            recognized: &self.recognized,
        })
    }

    fn close_ooi(&mut self, outcome: OoiOutcome) -> Result<()> {
        if let Some(o) = self.ooi.take() {
            if outcome == OoiOutcome::Abandoned {
                self.abandoned.extend(o.ids.iter().copied());
            }
            if let OoiOutcome::Recognized(id) = outcome {
                self.recognized[id as usize].nbv_count = o.nbv;
            }
            self.oois.push(OoiRecord {
                ooi: o.id,
                nbv_count: o.nbv,
                outcome,
            });
        }
        Ok(())
    }

    fn abandon(&mut self, reason: &str) -> Result<()> {
        if let Some(o) = &self.ooi {
            self.rec.push(TraceEvent::Abandon {
                step: self.step(),
                ooi: o.id,
                reason: reason.into(),
            })?;
        }
        self.close_ooi(OoiOutcome::Abandoned)
    }

    /// Follows the object of interest into the new segmentation by stable
    /// point id overlap. Returns its object index when still live.
    fn track(&mut self, pass: &Pass, replaced: &[Option<u32>]) -> Result<Option<usize>> {
        let Some(o) = &self.ooi else { return Ok(None) };
        let mut best: Option<(usize, usize)> = None;
        for (k, ids) in pass.object_ids.iter().enumerate() {
            let n = ids.iter().filter(|i| o.ids.contains(i)).count();
            if n > 0 && best.is_none_or(|(_, bn)| n > bn) {
                best = Some((k, n));
            }
        }
        match best {
            None => {
                self.close_ooi(OoiOutcome::Lost)?;
                Ok(None)
            }
            Some((k, _)) => {
                if let Some(id) = replaced[k] {
                    self.close_ooi(OoiOutcome::Recognized(id))?;
                    return Ok(None);
                }
                let ids = pass.object_ids[k].iter().copied().collect();
                if let Some(o) = self.ooi.as_mut() {
                    o.ids = ids;
                }
                Ok(Some(k))
            }
        }
    }

    fn is_abandoned(&self, ids: &[u64]) -> bool {
        let n = ids.iter().filter(|i| self.abandoned.contains(i)).count();
        2 * n > ids.len()
    }

    fn nav_grid(&self, pass: &Pass) -> Result<NavGrid> {
        let b = self.scene.bounds();
        let mut nav = NavGrid::new(Grid2::covering(&b, self.cfg.nav_resolution)?);
        for idx in 0..nav.grid.len() {
            let c = nav.grid.center(idx);
            if !self.scene.floor.contains(c.x, c.y) {
                nav.blocked[idx] = true;
            }
        }
        let min_z = pass.floor_height + self.cfg.obstacle_min_height;
        let live = pass.objects.iter().flat_map(|r| r.cloud.points.iter());
        for p in live.chain(pass.structure.iter()) {
            if p.z > min_z {
                nav.block_point(*p);
            }
        }
        for bx in &self.replaced_boxes {
            nav.block_footprint(bx);
        }
        Ok(nav)
    }

    fn occupancy(&self, pass: &Pass) -> Result<ScalarField> {
        let grid = VoxelGrid::covering(&self.scene.bounds(), self.cfg.scene_resolution, 0.0)?;
        let mut occ = ScalarField::zeros(grid);
        let live = pass.objects.iter().flat_map(|r| r.cloud.points.iter());
        for p in live.chain(pass.structure.iter()).chain(self.archive.points.iter()) {
            if let Some(i) = grid.index_of(*p) {
                occ.set(i, 1.0);
            }
        }
        Ok(occ)
    }

    fn navigate(&mut self, path: &NavPath, view: &Viewpoint) -> Result<()> {
        self.rec.push(TraceEvent::Navigation {
            step: self.step(),
            from: self.robot.position,
            to: view.position,
            length: path.length,
            waypoints: path.waypoints.clone(),
        })?;
        self.robot.traveled += path.length;
        self.robot.position = view.position;
        self.robot.view_direction = view.view_direction;
        Ok(())
    }

    fn choose_nbo(&mut self, pass: &Pass, replaced: &[Option<u32>]) -> Result<Option<usize>> {
        let eligible: Vec<usize> = (0..pass.objects.len())
            .filter(|&k| {
                replaced[k].is_none()
                    && pass.states[k] == ObjectState::InProgress
                    && !self.is_abandoned(&pass.object_ids[k])
            })
            .collect();
        if eligible.is_empty() {
            return Ok(None);
        }
        let inputs: Vec<NboInput> = eligible.iter().map(|&k| NboInput::from(&pass.objects[k])).collect();
        let Some((i, scores)) = select_nbo(&inputs, &self.robot, &self.cfg.weights) else { return Ok(None) };
        let k = eligible[i];
        let id = self.next_ooi;
        self.next_ooi += 1;
        self.nbo_count += 1;
        self.ooi = Some(Ooi {
            id,
            ids: pass.object_ids[k].iter().copied().collect(),
            nbv: 0,
        });
        self.rec.push(TraceEvent::NboDecision {
            step: self.step(),
            robot: self.robot,
            weights: self.cfg.weights,
            inputs,
            scores,
            chosen: Some(pass.objects[k].id),
            ooi: Some(id),
        })?;
        Ok(Some(k))
    }

    /// Scores candidate views around object `k` and scans from the best
    /// reachable one. Returns false when no view could be executed.
    fn nbv_step(&mut self, pass: &Pass, k: usize, nav: &NavGrid, occ: &ScalarField) -> Result<bool> {
        let cfg = self.cfg;
        let r = &pass.objects[k];
        let Some(bbox) = Aabb::from_points(&r.cloud.points) else { return Ok(false) };
        let grid = object_grid(&r.cloud.points)?;
        let blur_m = cfg.blur_sigma * grid.resolution;
        let cands = if r.similar.is_empty() {
            Vec::new()
        } else {
            align_candidates(&r.keypoints, r.diag, &r.similar, self.db, &grid, blur_m).unwrap_or_default()
        };
        let prior = priors(&cands.iter().map(|c| c.objectness).collect::<Vec<_>>()).unwrap_or_default();
        let gamma = field_of(&r.cloud.points, &grid, blur_m)?;
        let fields: Vec<&ScalarField> = cands.iter().map(|c| &c.field).collect();
        let mut targets: Vec<usize> = r.cloud.points.iter().filter_map(|p| occ.grid.index_of(*p)).collect();
        targets.sort_unstable();
        targets.dedup();
        let center = bbox.center();
        let views = sample_viewpoints(center, bbox.diag(), &targets, cfg.n_v, occ, &cfg.camera, cfg.h_cam);
        let mut candidates: Vec<ViewCandidate> = Vec::new();
        if !prior.is_empty() {
            for (index, view) in views {
                let mut seen: HashMap<usize, bool> = HashMap::new();
                let (gain, per_model) = conditional_info_gain(&prior, &fields, &gamma, |i| {
                    *seen.entry(i).or_insert_with(|| {
                        let p = grid.center(i);
                        cfg.camera.sees(&view, p)
                            && occ.grid.index_of(p).is_some_and(|s| visible_from(occ, view.position, s))
                    })
                })?;
                candidates.push(ViewCandidate {
                    index,
                    viewpoint: view,
                    valid: true,
                    gain,
                    per_model,
                });
            }
        }
        let argmax = select_nbv(&candidates).ok().map(|i| candidates[i].index);
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            candidates[b]
                .gain
                .total_cmp(&candidates[a].gain)
                .then(candidates[a].index.cmp(&candidates[b].index))
        });
        let informative = candidates.iter().any(|c| c.gain > 1e-6);
        let mut unreachable = Vec::new();
        let mut revisits = Vec::new();
        let mut chosen: Option<(usize, NavPath, Viewpoint)> = None;
        if informative {
            for &i in &order {
                let c = &candidates[i];
                if self.t.scan_origins.iter().any(|o| o.dist(c.viewpoint.position) < REVISIT_RADIUS) {
                    revisits.push(c.index);
                    continue;
                }
                match plan_path(nav, self.robot.position, c.viewpoint.position, cfg.clearance) {
                    Ok(path) => {
                        chosen = Some((c.index, path, c.viewpoint));
                        break;
                    }
                    Err(_) => unreachable.push(c.index),
                }
            }
        }
        let mut fallback = None;
        if chosen.is_none() {
            let visited = &self.t.scan_origins;
            for v in fallback_views(center, bbox.diag(), &bbox, &targets, cfg.n_v, occ, &cfg.camera, cfg.h_cam, visited) {
                if let Ok(path) = plan_path(nav, self.robot.position, v.position, cfg.clearance) {
                    fallback = Some((path, v));
                    break;
                }
            }
        }
        let (ooi, nbv_index) = self.ooi.as_ref().map_or((0, 0), |o| (o.id, o.nbv));
        self.rec.push(TraceEvent::NbvDecision {
            step: self.step(),
            ooi,
            object: r.id,
            nbv_index,
            priors: prior,
            candidates,
            argmax,
            chosen: chosen.as_ref().map(|c| c.0),
            unreachable,
            revisits,
            fallback: fallback.as_ref().map(|f| f.1),
        })?;
        let (path, view, kind) = match (chosen, fallback) {
            (Some((_, p, v)), _) => (p, v, ScanKind::Nbv),
            (None, Some((p, v))) => (p, v, ScanKind::Fallback),
            (None, None) => return Ok(false),
        };
        self.navigate(&path, &view)?;
        if let Some(o) = self.ooi.as_mut() {
            o.nbv += 1;
        }
        self.scan(view, kind)?;
        Ok(true)
    }

    fn frontier_excluded(&self, nav: &NavGrid) -> Vec<bool> {
        let inflated = nav.inflate(self.cfg.clearance);
        let g = &self.floor_map.grid;
        (0..g.len())
            .map(|c| {
                let p = g.center(c);
                !self.scene.floor.contains(p.x, p.y)
                    || nav.grid.cell_of(p).is_none_or(|n| inflated[n])
                    || self.attempted_frontiers.iter().any(|a| a.dist(p) < 0.5)
            })
            .collect()
    }

    /// Drives to the nearest reachable floor frontier and scans it.
    fn frontier_step(&mut self, nav: &NavGrid) -> Result<Option<TerminationReason>> {
        if !self.floor_found {
            return Ok(Some(TerminationReason::NoFloor));
        }
        if self.frontier_visits >= self.cfg.max_frontier_visits {
            return Ok(Some(TerminationReason::FrontierBudget));
        }
        loop {
            let excluded = self.frontier_excluded(nav);
            let Some(ft) = frontier_target(
                &self.floor_map,
                &excluded,
                self.robot.position,
                self.cfg.frontier_standoff,
                self.cfg.h_cam,
                self.cfg.frontier_pitch_deg.to_radians(),
            ) else {
                return Ok(Some(TerminationReason::Explored));
            };
            let cell_center = self.floor_map.grid.center(ft.cell);
            self.attempted_frontiers.push(cell_center);
            let path = plan_path(nav, self.robot.position, ft.viewpoint.position, self.cfg.clearance);
            self.rec.push(TraceEvent::Frontier {
                step: self.step(),
                cell: ft.cell,
                viewpoint: ft.viewpoint,
                reachable: path.is_ok(),
            })?;
            if let Ok(path) = path {
                self.navigate(&path, &ft.viewpoint)?;
                self.frontier_visits += 1;
                self.scan(ft.viewpoint, ScanKind::Frontier)?;
                return Ok(None);
            }
            self.partial = true;
        }
    }

    fn run(&mut self) -> Result<TerminationReason> {
        let e = self.scene.entry.clone();
        let start = Point::new(e.position[0], e.position[1], self.scene.floor.height + e.height);
        let target = self.scene.objects_centroid();
        let target = Point::new(target.x, target.y, self.scene.floor.height);
        let view = Viewpoint::look_at(start, target)?;
        self.robot = RobotState::new(start, view.view_direction);
        self.scan(view, ScanKind::Entry)?;
        loop {
            let pass = self.segment()?;
            let replaced = self.replace_completes(&pass)?;
            self.notify(&pass, &replaced)?;
            self.residual = pass
                .objects
                .iter()
                .enumerate()
                .filter(|(k, _)| replaced[*k].is_none())
                .map(|(k, r)| ResidualObject {
                    label: self.db.label_name(r.label).to_string(),
                    points: r.cloud.len(),
                    objectness: r.objectness,
                    state: pass.states[k],
                    aabb: Aabb::from_points(&r.cloud.points),
                })
                .collect();
            let mut current = self.track(&pass, &replaced)?;
            if current.is_some() && self.ooi.as_ref().is_some_and(|o| o.nbv >= self.cfg.max_nbv) {
                self.abandon("NBV budget spent")?;
                current = None;
            }
            let nav = self.nav_grid(&pass)?;
            let occ = self.occupancy(&pass)?;
            let mut scanned = false;
            loop {
                let k = match current.take() {
                    Some(k) => k,
                    None => match self.choose_nbo(&pass, &replaced)? {
                        Some(k) => k,
                        None => break,
                    },
                };
                if self.nbv_step(&pass, k, &nav, &occ)? {
                    scanned = true;
                    break;
                }
                self.partial = true;
                self.abandon("no reachable view")?;
            }
            if scanned {
                continue;
            }
            if let Some(reason) = self.frontier_step(&nav)? {
                return Ok(reason);
            }
        }
    }
}

/// Runs one episode. Trace records stream to `sink` as they are produced;
/// a write failure aborts the episode.
pub fn run_episode_with<'w, 'o>(
    scene: &Scene,
    db: &Database,
    cfg: &Config,
    sink: Option<&'w mut dyn Write>,
    observer: Option<&'w mut (dyn Observer + 'o)>,
) -> Result<(ReconstructionResult, EpisodeTrace)> {
    cfg.validate()?;
    let floor_grid = Grid2::covering(&scene.bounds(), cfg.floor_resolution)?;
    let mut ep = Episode {
        scene,
        db,
        cfg,
        prepared: PreparedScene::from_scene(scene),
        t: ObservedSurface::new(cfg.r_dedup),
        archive: PointCloud::new(),
        archive_labels: Vec::new(),
        recognized: Vec::new(),
        replaced_boxes: Vec::new(),
        cache: RetrievalCache::new(),
        robot: RobotState::new(Point::ZERO, Point::X),
        floor_map: FloorMap::new(floor_grid),
        attempted_frontiers: Vec::new(),
        abandoned: HashSet::new(),
        ooi: None,
        oois: Vec::new(),
        next_ooi: 0,
        nbo_count: 0,
        nbv_scans: 0,
        frontier_visits: 0,
        partial: false,
        floor_found: false,
        max_steps: (scene.objects.len() + 1) * cfg.max_nbv + cfg.max_frontier_visits + 1,
        rec: TraceRecorder::new(sink),
        observer,
        residual: Vec::new(),
    };
    let reason = ep.run()?;
    ep.close_ooi(OoiOutcome::Open)?;
    let step = ep.step();
    ep.rec.push(TraceEvent::Termination {
        step,
        reason,
        partial: ep.partial,
        nbo_count: ep.nbo_count,
        traveled: ep.robot.traveled,
    })?;
    let result = ReconstructionResult {
        recognized: ep.recognized,
        unrecognized: ep.residual,
        nbo_count: ep.nbo_count,
        oois: ep.oois,
        total_travel: ep.robot.traveled,
        scans: step,
        nbv_scans: ep.nbv_scans,
        floor_found: ep.floor_found,
        partial: ep.partial,
        surface_points: ep.t.len(),
        replaced_points: ep.archive.len(),
        curves: Vec::new(),
    };
    Ok((result, ep.rec.trace))
}

/// [`run_episode_with`] without a sink or observer.
pub fn run_episode(scene: &Scene, db: &Database, cfg: &Config) -> Result<(ReconstructionResult, EpisodeTrace)> {
    run_episode_with(scene, db, cfg, None, None)
}
