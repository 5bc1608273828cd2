//! Component graph and graph-cuts post-segmentation.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::database::cache::RetrievalCache;
use crate::database::{Database, SimilarModelSet, Subset};
use crate::error::Result;
use crate::geometry::{centroid, Point};
use crate::segmentation::adjacency::adjacent_pairs;
use crate::segmentation::expansion::{Labeling, PottsProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: u32,
    /// Ascending indices into the observed surface.
    pub indices: Vec<usize>,
    pub cloud: PointCloud,
    pub keypoints: Vec<Point>,
    pub similar: SimilarModelSet,
    pub centroid: Point,
    pub diag: f64,
}

impl Component {
    /// Retrieves M(c) for `indices` of `surface` (any subset of the database).
    /// Degenerate clouds get an empty similar set.
    pub fn new(
        id: u32,
        surface: &PointCloud,
        indices: Vec<usize>,
        db: &Database,
        n_s: usize,
        cache: &mut RetrievalCache,
    ) -> Component {
        let cloud = surface.select(&indices);
        let centroid = centroid(&cloud.points).unwrap_or(Point::ZERO);
        let (keypoints, diag, similar) = match cache.retrieve(db, &cloud.points, n_s, Subset::All) {
            Ok(r) => (r.keypoints, r.diag, r.similar),
            Err(_) => {
                let diag = crate::cloud::diag_of(&cloud.points).unwrap_or(0.0);
                (cloud.points.clone(), diag, SimilarModelSet::default())
            }
        };
        Component {
            id,
            indices,
            cloud,
            keypoints,
            similar,
            centroid,
            diag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Smoothness weight w_ab.
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentGraph {
    pub nodes: Vec<Component>,
    pub edges: Vec<GraphEdge>,
}

/// Adjacent component pairs `(a, b)`, `a < b`, by node index.
pub fn component_adjacency(components: &[Component], radius: f64) -> Vec<(usize, usize)> {
    let sets: Vec<Vec<Point>> = components.iter().map(|c| c.cloud.points.clone()).collect();
    adjacent_pairs(&sets, radius)
}

/// Cost of labeling `c` with `label`: the smallest 1 − O over candidates
/// carrying that label, or 1 when none does.
pub fn data_term(c: &Component, label: u32, db: &Database) -> f64 {
    c.similar
        .items
        .iter()
        .filter(|m| db.entry(m.entry).label == label)
        .map(|m| (1.0 - m.score).clamp(0.0, 1.0))
        .fold(1.0, f64::min)
}

/// Largest objectness of the union `c ∪ d` against the whole database;
/// 0 when retrieval yields nothing.
pub fn smoothness_term(c: &Component, d: &Component, db: &Database, n_s: usize, cache: &mut RetrievalCache) -> f64 {
    let mut union = c.cloud.points.clone();
    union.extend_from_slice(&d.cloud.points);
    match cache.retrieve(db, &union, n_s, Subset::All) {
        Ok(r) => r.similar.items.iter().map(|m| m.score).fold(0.0, f64::max).clamp(0.0, 1.0),
        Err(_) => 0.0,
    }
}

impl ComponentGraph {
    /// Connects adjacent components and caches their smoothness weights.
    pub fn build(
        nodes: Vec<Component>,
        radius: f64,
        db: &Database,
        n_s: usize,
        cache: &mut RetrievalCache,
    ) -> ComponentGraph {
        let edges = component_adjacency(&nodes, radius)
            .into_iter()
            .map(|(a, b)| GraphEdge {
                a,
                b,
                weight: smoothness_term(&nodes[a], &nodes[b], db, n_s, cache),
            })
            .collect();
        ComponentGraph { nodes, edges }
    }

    pub fn problem(&self, db: &Database) -> PottsProblem {
        let n_l = db.n_labels() as u32;
        PottsProblem {
            unary: self
                .nodes
                .iter()
                .map(|c| (1..=n_l).map(|l| data_term(c, l, db)).collect())
                .collect(),
            edges: self.edges.iter().map(|e| (e.a, e.b, e.weight)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedObject {
    pub id: u32,
    /// Ascending indices into the observed surface.
    pub indices: Vec<usize>,
    pub cloud: PointCloud,
    /// Node indices of the merged components, ascending.
    pub components: Vec<usize>,
    pub label: u32,
    pub keypoints: Vec<Point>,
    pub diag: f64,
    /// M(r) over full models only.
    pub similar: SimilarModelSet,
    pub objectness: f64,
    pub centroid: Point,
    /// Point count.
    pub area: f64,
}

impl SegmentedObject {
    pub fn new(
        id: u32,
        surface: &PointCloud,
        mut indices: Vec<usize>,
        components: Vec<usize>,
        label: u32,
        db: &Database,
        n_s: usize,
        cache: &mut RetrievalCache,
    ) -> SegmentedObject {
        indices.sort_unstable();
        let cloud = surface.select(&indices);
        let (keypoints, diag, similar) = match cache.retrieve(db, &cloud.points, n_s, Subset::FullOnly) {
            Ok(r) => (r.keypoints, r.diag, r.similar),
            Err(_) => {
                let diag = crate::cloud::diag_of(&cloud.points).unwrap_or(0.0);
                (cloud.points.clone(), diag, SimilarModelSet::default())
            }
        };
        let objectness = similar.best().map_or(0.0, |m| m.score);
        SegmentedObject {
            id,
            centroid: centroid(&cloud.points).unwrap_or(Point::ZERO),
            area: cloud.len() as f64,
            indices,
            cloud,
            components,
            label,
            keypoints,
            diag,
            similar,
            objectness,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected groups of same-label nodes, each ascending, ordered by their
/// smallest node.
pub fn same_label_groups(n: usize, edges: &[(usize, usize)], labels: &[u32]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        if labels[a] == labels[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Minimizes the Potts energy over the graph by α-expansion and merges
/// connected same-label components into objects re-scored against full
/// models.
pub fn post_segment(
    graph: &ComponentGraph,
    surface: &PointCloud,
    db: &Database,
    n_s: usize,
    cache: &mut RetrievalCache,
) -> Result<(Labeling, Vec<SegmentedObject>)> {
    if graph.nodes.is_empty() {
        return Ok((
            Labeling {
                labels: Vec::new(),
                energy: 0.0,
            },
            Vec::new(),
        ));
    }
    let labeling = graph.problem(db).solve();
    let pairs: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.a, e.b)).collect();
    let objects = same_label_groups(graph.nodes.len(), &pairs, &labeling.labels)
        .into_iter()
        .enumerate()
        .map(|(k, group)| {
            let indices: Vec<usize> = group.iter().flat_map(|&i| graph.nodes[i].indices.iter().copied()).collect();
            let label = labeling.labels[group[0]];
            SegmentedObject::new(k as u32, surface, indices, group, label, db, n_s, cache)
        })
        .collect();
    Ok((labeling, objects))
}
