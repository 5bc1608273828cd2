use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};

/// Ground-truth surface a simulated measurement came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SurfaceId {
    Object(u32),
    Floor,
    Wall(u32),
}

impl SurfaceId {
    pub fn object(self) -> Option<u32> {
        match self {
            SurfaceId::Object(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: SurfaceId,
    pub scan: u32,
}

/// Sampled surface points. `provenance` and `segment` are parallel to
/// `points`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub provenance: Vec<Option<Provenance>>,
    pub segment: Vec<Option<u32>>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Point>) -> Self {
        let n = points.len();
        PointCloud {
            points,
            provenance: vec![None; n],
            segment: vec![None; n],
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        PointCloud {
            points: Vec::with_capacity(n),
            provenance: Vec::with_capacity(n),
            segment: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, p: Point, provenance: Option<Provenance>) {
        self.points.push(p);
        self.provenance.push(provenance);
        self.segment.push(None);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    /// Sub-cloud of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
            segment: indices.iter().map(|&i| self.segment[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.provenance.extend_from_slice(&other.provenance);
        self.segment.extend_from_slice(&other.segment);
    }
}

/// Diagonal length of the axis-aligned bounding box of `points`.
pub fn diag_of(points: &[Point]) -> Result<f64> {
    Aabb::from_points(points).map(|b| b.diag()).ok_or(Error::EmptyCloud)
}

/// Diagonal length of the cloud's axis-aligned bounding box.
pub fn diag(cloud: &PointCloud) -> Result<f64> {
    diag_of(&cloud.points)
}
