use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::Result;
use crate::geometry::Point;

use super::{Database, SimilarModelSet, Subset};

/// Keypoints, diagonal and similar set of one retrieval query.
#[derive(Clone, Debug, PartialEq)]
pub struct Retrieval {
    pub keypoints: Vec<Point>,
    pub diag: f64,
    pub similar: SimilarModelSet,
}

/// Memoizes retrievals by the exact bits of the query cloud. Identical
/// component clouds recur across planning steps whenever a scan leaves
/// them untouched.
#[derive(Debug, Default)]
pub struct RetrievalCache {
    map: HashMap<u64, Retrieval>,
    pub hits: usize,
    pub misses: usize,
}

fn key(points: &[Point], n_s: usize, subset: Subset) -> u64 {
    let mut h = DefaultHasher::new();
    points.len().hash(&mut h);
    for p in points {
        p.x.to_bits().hash(&mut h);
        p.y.to_bits().hash(&mut h);
        p.z.to_bits().hash(&mut h);
    }
    n_s.hash(&mut h);
    subset.hash(&mut h);
    h.finish()
}

impl RetrievalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn retrieve(&mut self, db: &Database, points: &[Point], n_s: usize, subset: Subset) -> Result<Retrieval> {
        let k = key(points, n_s, subset);
        if let Some(r) = self.map.get(&k) {
            self.hits += 1;
            return Ok(r.clone());
        }
        self.misses += 1;
        let q = db.query(points)?;
        let similar = db.retrieve(&q, n_s, subset)?;
        let r = Retrieval {
            keypoints: q.keypoints,
            diag: q.diag,
            similar,
        };
        self.map.insert(k, r.clone());
        Ok(r)
    }
}
