//! Prior-knowledge shape database: virtually scanned catalog models, their
//! near-convex components and adjacent component pairs, with keypoints,
//! descriptors and a spatial bag of words for retrieval.

pub mod cache;
pub mod descriptor;
pub mod keypoints;
pub mod registration;

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Viewpoint};
use crate::cloud::{diag_of, PointCloud, SurfaceId};
use crate::error::{Error, Result};
use crate::geometry::{Point, Pose};
use crate::scanner::fusion::{ObservedSurface, R_DEDUP};
use crate::scanner::mesh::{Geometry, TriangleMesh};
use crate::scanner::render::{depth_to_cloud, render_prepared, PreparedScene};
use crate::scanner::scene::CatalogModel;
use crate::segmentation::adjacency::adjacent_pairs;
use crate::segmentation::objectness::{matching_rate_tree, objectness_from_rates};
use crate::segmentation::presegment::{presegment, PresegParams};
use crate::spatial::KdTree;

use descriptor::{describe, l1_distance, spin_histograms, Codebook, LOCAL_SUPPORT};
use keypoints::sample_keypoints;

pub const DB_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbParams {
    pub n_p: usize,
    pub k_views: usize,
    /// Virtual scanning camera. Its range must cover twice the largest
    /// model diagonal.
    pub camera: CameraModel,
    pub r_dedup: f64,
    /// Place a floor occluder under each model so its base is never seen.
    pub occlude_base: bool,
    /// Points this close above the model base are dropped, as floor
    /// removal does in scenes.
    pub base_band: f64,
    pub preseg: PresegParams,
    pub adjacency_radius: f64,
    /// Components with fewer points are not stored.
    pub min_component_points: usize,
    pub codebook_k: usize,
    pub seed: u64,
}

impl Default for DbParams {
    fn default() -> Self {
        DbParams {
            n_p: 500,
            k_views: 26,
            camera: CameraModel {
                width: 320,
                height: 240,
                d_min: 0.05,
                d_max: 50.0,
                ..CameraModel::default()
            },
            r_dedup: R_DEDUP,
            occlude_base: true,
            base_band: 0.03,
            preseg: PresegParams::default(),
            adjacency_radius: 0.03,
            min_component_points: 30,
            codebook_k: 50,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntryKind {
    Full,
    Component,
    Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: u32,
    pub model_id: String,
    pub kind: EntryKind,
    /// Class id in `1..=n_l`.
    pub label: u32,
    /// Component ordinals of the source model this entry covers.
    pub parts: Vec<u32>,
    pub cloud: PointCloud,
    pub keypoints: Vec<Point>,
    pub descriptor: Vec<f64>,
    pub diag: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    All,
    FullOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarModel {
    pub entry: u32,
    /// Objectness O(query, entry) under `pose`.
    pub score: f64,
    /// Places the entry (model frame) onto the query.
    pub pose: Pose,
}

/// Up to n_s candidates, descending by score, ties by entry id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarModelSet {
    pub items: Vec<SimilarModel>,
}

impl SimilarModelSet {
    pub fn best(&self) -> Option<&SimilarModel> {
        self.items.first()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// A query cloud prepared for retrieval.
#[derive(Clone, Debug)]
pub struct QueryShape {
    pub keypoints: Vec<Point>,
    pub tree: KdTree,
    pub diag: f64,
    pub bow: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Database {
    pub format_version: u32,
    pub params: DbParams,
    /// Label names; label id `i + 1` is `labels[i]`.
    pub labels: Vec<String>,
    pub entries: Vec<ModelEntry>,
    pub codebook: Codebook,
    pub histograms: Vec<Vec<f64>>,
    #[serde(skip)]
    trees: Vec<KdTree>,
}

/// Cube-lattice directions for 26 views, a Fibonacci sphere otherwise.
pub fn view_directions(k: usize) -> Vec<Point> {
    if k == 26 {
        let mut out = Vec::new();
        for x in -1..=1 {
            for y in -1..=1 {
                for z in -1..=1 {
                    if (x, y, z) != (0, 0, 0) {
                        out.push(Point::new(x as f64, y as f64, z as f64).normalized().expect("non-zero"));
                    }
                }
            }
        }
        return out;
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            Point::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Scans `geometry` from `k_views` directions on a sphere of radius
/// 2·diag around its bounding-box center and fuses the scans.
pub fn virtual_scan_surface(
    geometry: &Geometry,
    k_views: usize,
    cam: &CameraModel,
    occlude_base: bool,
    r_dedup: f64,
) -> Result<ObservedSurface> {
    if k_views == 0 {
        return Err(Error::InvalidParameter("k_views must be at least 1".into()));
    }
    let aabb = geometry.aabb().ok_or(Error::DegenerateGeometry("empty geometry".into()))?;
    let diag = aabb.diag();
    if !(diag > 0.0) {
        return Err(Error::DegenerateGeometry("zero diagonal".into()));
    }
    let mut scene = PreparedScene::new();
    scene.add(SurfaceId::Object(0), geometry, true);
    if occlude_base {
        let (c, r) = (aabb.center(), 10.0 * diag);
        let z = aabb.min.z;
        let mut plane = TriangleMesh::new();
        plane.vertices = vec![
            Point::new(c.x - r, c.y - r, z),
            Point::new(c.x + r, c.y - r, z),
            Point::new(c.x + r, c.y + r, z),
            Point::new(c.x - r, c.y + r, z),
        ];
        plane.triangles = vec![[0, 1, 2], [0, 2, 3]];
        scene.add(SurfaceId::Floor, &Geometry::Mesh(plane), false);
    }
    let center = aabb.center();
    let mut surface = ObservedSurface::new(r_dedup);
    for dir in view_directions(k_views) {
        let pos = center + dir * (2.0 * diag);
        let view = Viewpoint::look_at(pos, center)?;
        let mut cloud = depth_to_cloud(&render_prepared(&scene, &view, cam));
        let keep: Vec<usize> = (0..cloud.len())
            .filter(|&i| cloud.provenance[i].is_some_and(|p| p.source == SurfaceId::Object(0)))
            .collect();
        cloud = cloud.select(&keep);
        surface.fuse(&cloud, pos);
    }
    Ok(surface)
}

pub fn virtual_scan_model(geometry: &Geometry, k_views: usize, cam: &CameraModel) -> Result<PointCloud> {
    Ok(virtual_scan_surface(geometry, k_views, cam, false, R_DEDUP)?.cloud)
}

fn make_entry(
    id: u32,
    model_id: &str,
    kind: EntryKind,
    label: u32,
    parts: Vec<u32>,
    cloud: PointCloud,
    params: &DbParams,
) -> Result<ModelEntry> {
    let keypoints = sample_keypoints(&cloud.points, params.n_p, params.seed);
    let descriptor = describe(&cloud.points, &keypoints);
    let diag = diag_of(&cloud.points)?;
    Ok(ModelEntry {
        id,
        model_id: model_id.to_string(),
        kind,
        label,
        parts,
        cloud,
        keypoints,
        descriptor,
        diag,
    })
}

/// Per-model scan, decomposition and entry construction.
pub fn model_entries(model: &CatalogModel, label: u32, first_id: u32, params: &DbParams) -> Result<Vec<ModelEntry>> {
    let surface = virtual_scan_surface(
        &model.geometry,
        params.k_views,
        &params.camera,
        params.occlude_base,
        params.r_dedup,
    )?;
    let base = model.geometry.aabb().map_or(0.0, |b| b.min.z);
    let keep: Vec<usize> = (0..surface.len())
        .filter(|&i| surface.cloud.points[i].z >= base + params.base_band)
        .collect();
    let cloud = surface.cloud.select(&keep);
    if cloud.is_empty() {
        return Err(Error::DegenerateGeometry(format!("model {} yields no scan points", model.id)));
    }
    let regions: Vec<Vec<usize>> = presegment(&cloud, &surface.scan_origins, &params.preseg)
        .into_iter()
        .filter(|r| r.len() >= params.min_component_points)
        .collect();
    let sets: Vec<Vec<Point>> = regions.iter().map(|r| r.iter().map(|&i| cloud.points[i]).collect()).collect();
    let pairs = adjacent_pairs(&sets, params.adjacency_radius);

    let mut out = Vec::new();
    let mut next = first_id;
    let all_parts = (0..regions.len() as u32).collect();
    out.push(make_entry(next, &model.id, EntryKind::Full, label, all_parts, cloud.clone(), params)?);
    next += 1;
    for (k, r) in regions.iter().enumerate() {
        out.push(make_entry(next, &model.id, EntryKind::Component, label, vec![k as u32], cloud.select(r), params)?);
        next += 1;
    }
    for (a, b) in pairs {
        let mut idx: Vec<usize> = regions[a].iter().chain(&regions[b]).copied().collect();
        idx.sort_unstable();
        out.push(make_entry(
            next,
            &model.id,
            EntryKind::Pair,
            label,
            vec![a as u32, b as u32],
            cloud.select(&idx),
            params,
        )?);
        next += 1;
    }
    Ok(out)
}

pub fn build_database(catalog: &[CatalogModel], params: &DbParams) -> Result<Database> {
    if catalog.is_empty() {
        return Err(Error::InvalidParameter("empty catalog".into()));
    }
    for m in catalog {
        if m.label.trim().is_empty() {
            return Err(Error::UnlabeledModel(m.id.clone()));
        }
    }
    let labels: Vec<String> = catalog.iter().map(|m| m.label.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut entries = Vec::new();
    for m in catalog {
        let label = labels.iter().position(|l| *l == m.label).expect("collected above") as u32 + 1;
        let batch = model_entries(m, label, entries.len() as u32, params)?;
        entries.extend(batch);
    }
    let locals: Vec<_> = entries.iter().flat_map(|e| spin_histograms(&e.keypoints, LOCAL_SUPPORT)).collect();
    let codebook = Codebook::train(&locals, params.codebook_k, params.seed, 50);
    if codebook.len() < 3 {
        return Err(Error::InvalidParameter("codebook needs at least three centers".into()));
    }
    let histograms = entries.iter().map(|e| codebook.bag_of_words(&e.keypoints)).collect();
    let mut db = Database {
        format_version: DB_FORMAT_VERSION,
        params: params.clone(),
        labels,
        entries,
        codebook,
        histograms,
        trees: Vec::new(),
    };
    db.index();
    Ok(db)
}

impl Database {
    fn index(&mut self) {
        self.trees = self.entries.iter().map(|e| KdTree::new(&e.keypoints)).collect();
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_name(&self, label: u32) -> &str {
        &self.labels[label as usize - 1]
    }

    pub fn entry(&self, id: u32) -> &ModelEntry {
        &self.entries[id as usize]
    }

    pub fn full_entry(&self, model_id: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.kind == EntryKind::Full && e.model_id == model_id)
    }

    pub fn query(&self, points: &[Point]) -> Result<QueryShape> {
        let diag = diag_of(points)?;
        if !(diag > 0.0) {
            return Err(Error::DegenerateComponent);
        }
        let keypoints = sample_keypoints(points, self.params.n_p, self.params.seed);
        let tree = KdTree::new(&keypoints);
        let bow = self.codebook.bag_of_words(&keypoints);
        Ok(QueryShape {
            keypoints,
            tree,
            diag,
            bow,
        })
    }

    /// Registers entry `id` onto the query and returns (objectness, pose).
    pub fn score_entry(&self, q: &QueryShape, id: u32) -> (f64, Pose) {
        let e = &self.entries[id as usize];
        let tree = &self.trees[id as usize];
        let rates = |pose: &Pose| {
            let inv = pose.inverse();
            let moved: Vec<Point> = q.keypoints.iter().map(|p| inv.apply(*p)).collect();
            let d_cm = matching_rate_tree(&moved, tree);
            let placed: Vec<Point> = e.keypoints.iter().map(|p| pose.apply(*p)).collect();
            let d_mc = matching_rate_tree(&placed, &q.tree);
            (d_cm, d_mc)
        };
        let pose = registration::register(&q.keypoints, &e.keypoints, tree, |p| {
            let (a, b) = rates(p);
            a + b
        });
        let (a, b) = rates(&pose);
        let o = objectness_from_rates(a, b, q.diag).unwrap_or(0.0);
        (o, pose)
    }

    /// BoW shortlist of 4·n_s entries re-ranked by objectness.
    pub fn retrieve(&self, q: &QueryShape, n_s: usize, subset: Subset) -> Result<SimilarModelSet> {
        let mut cands: Vec<(f64, u32)> = self
            .entries
            .iter()
            .filter(|e| subset == Subset::All || e.kind == EntryKind::Full)
            .map(|e| (l1_distance(&q.bow, &self.histograms[e.id as usize]), e.id))
            .collect();
        if cands.is_empty() {
            return Err(Error::NoCandidates);
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(4 * n_s);
        let mut scored: Vec<SimilarModel> = cands
            .iter()
            .map(|&(_, id)| {
                let (score, pose) = self.score_entry(q, id);
                SimilarModel { entry: id, score, pose }
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entry.cmp(&b.entry)));
        scored.truncate(n_s);
        Ok(SimilarModelSet { items: scored })
    }

    pub fn save(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&DB_FORMAT_VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut w, self)?;
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Database> {
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let found = u32::from_le_bytes(v);
        if found != DB_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: DB_FORMAT_VERSION,
            });
        }
        let mut db: Database = bincode::deserialize_from(r)?;
        db.index();
        Ok(db)
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        self.save(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_file(path: &Path) -> Result<Database> {
        Database::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Convenience wrapper: prepare `query` and retrieve.
pub fn retrieve_similar(query: &[Point], db: &Database, n_s: usize, subset: Subset) -> Result<SimilarModelSet> {
    db.retrieve(&db.query(query)?, n_s, subset)
}
