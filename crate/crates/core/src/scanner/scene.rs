//! Ground-truth scenes and the JSON scene/catalog file formats.
//!
//! Scene file (`format_version` 1):
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "catalog": "catalog.json",
//!   "floor": { "height": 0.0, "polygon": [[0,0],[5,0],[5,5],[0,5]] },
//!   "walls": [ { "from": [0,0], "to": [5,0], "height": 2.5 } ],
//!   "objects": [ { "model": "chair", "position": [1,2,0], "yaw_deg": 30, "scale": 1.0 } ],
//!   "entry": { "position": [0.5, 0.5], "height": 1.2 }
//! }
//! ```
//!
//! `catalog` is resolved relative to the scene file. The catalog manifest
//! lists `{ "id", "file", "label" }` entries whose OBJ/PLY paths are
//! resolved relative to the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point, Pose};
use crate::scanner::io;
use crate::scanner::mesh::Geometry;

pub const SCENE_FORMAT_VERSION: u32 = 1;
pub const CATALOG_FORMAT_VERSION: u32 = 1;

/// A labeled catalog shape in its canonical frame (upright, base at z = 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogModel {
    pub id: String,
    pub label: String,
    pub geometry: Geometry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u32,
    pub label: String,
    pub model_id: String,
    /// Geometry in the model frame.
    pub geometry: Geometry,
    pub pose: Pose,
}

impl GroundTruthObject {
    pub fn world_geometry(&self) -> Geometry {
        self.geometry.transformed(&self.pose)
    }

    pub fn world_aabb(&self) -> Option<Aabb> {
        self.world_geometry().aabb()
    }

    /// Resting on the floor (within 5 cm).
    pub fn on_floor(&self, floor_height: f64) -> bool {
        self.world_aabb().is_some_and(|b| b.min.z - floor_height < 0.05)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub height: f64,
    /// Convex or simple polygon in the xy plane.
    pub polygon: Vec<[f64; 2]>,
}

impl Floor {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        point_in_polygon(&self.polygon, x, y)
    }

    pub fn bounds_xy(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.polygon {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[(i + n - 1) % n];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}

/// Vertical wall segment from `from` to `to` rising `height` above the floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryPose {
    pub position: [f64; 2],
    /// Camera height above the floor.
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<GroundTruthObject>,
    pub floor: Floor,
    pub walls: Vec<Wall>,
    pub entry: EntryPose,
}

impl Scene {
    /// Free-space bounds: floor polygon extent up to the tallest wall.
    pub fn bounds(&self) -> Aabb {
        let (lo, hi) = self.floor.bounds_xy();
        let top = self.walls.iter().map(|w| w.height).fold(2.5f64, f64::max);
        Aabb::new(
            Point::new(lo[0], lo[1], self.floor.height),
            Point::new(hi[0], hi[1], self.floor.height + top),
        )
    }

    /// Geometric center of the placed objects (or of the floor when empty).
    pub fn objects_centroid(&self) -> Point {
        let centers: Vec<Point> = self.objects.iter().filter_map(|o| o.world_aabb()).map(|b| b.center()).collect();
        crate::geometry::centroid(&centers).unwrap_or_else(|| self.bounds().center())
    }

    pub fn object(&self, id: u32) -> Option<&GroundTruthObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn validate(&self, interpenetration_tol: f64) -> Result<()> {
        if self.floor.polygon.len() < 3 {
            return Err(Error::InvalidParameter("floor polygon needs three vertices".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut boxes = Vec::new();
        for o in &self.objects {
            if o.geometry.is_empty() {
                return Err(Error::InvalidParameter(format!("object {} has empty geometry", o.id)));
            }
            if !seen.insert(o.id) {
                return Err(Error::InvalidParameter(format!("duplicate object id {}", o.id)));
            }
            let b = o.world_aabb().expect("non-empty geometry");
            let c = b.center();
            if !self.floor.contains(c.x, c.y) {
                return Err(Error::InvalidParameter(format!("object {} is outside the floor", o.id)));
            }
            boxes.push((o.id, b));
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if let Some(x) = boxes[i].1.intersection(&boxes[j].1) {
                    let e = x.extent();
                    if e.x.min(e.y).min(e.z) > interpenetration_tol {
                        return Err(Error::InvalidParameter(format!(
                            "objects {} and {} interpenetrate",
                            boxes[i].0, boxes[j].0
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogEntryFile {
    pub id: String,
    pub file: PathBuf,
    pub label: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogManifest {
    pub format_version: u32,
    pub models: Vec<CatalogEntryFile>,
}

impl CatalogManifest {
    pub fn load(path: &Path) -> Result<Vec<CatalogModel>> {
        let manifest: CatalogManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if manifest.format_version != CATALOG_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: manifest.format_version,
                expected: CATALOG_FORMAT_VERSION,
            });
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        manifest
            .models
            .iter()
            .map(|m| {
                if m.label.trim().is_empty() {
                    return Err(Error::UnlabeledModel(m.id.clone()));
                }
                Ok(CatalogModel {
                    id: m.id.clone(),
                    label: m.label.clone(),
                    geometry: io::read_geometry(&dir.join(&m.file))?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub model: String,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneFile {
    pub format_version: u32,
    pub catalog: PathBuf,
    pub floor: Floor,
    pub walls: Vec<Wall>,
    pub objects: Vec<ObjectPlacement>,
    pub entry: EntryPose,
}

impl SceneFile {
    pub fn instantiate(&self, catalog: &[CatalogModel]) -> Result<Scene> {
        if self.format_version != SCENE_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: SCENE_FORMAT_VERSION,
            });
        }
        let objects = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let model = catalog
                    .iter()
                    .find(|m| m.id == o.model)
                    .ok_or_else(|| Error::Parse(format!("unknown catalog model `{}`", o.model)))?;
                if !(o.scale > 0.0) {
                    return Err(Error::InvalidParameter(format!("object {i} has non-positive scale")));
                }
                Ok(GroundTruthObject {
                    id: i as u32,
                    label: model.label.clone(),
                    model_id: model.id.clone(),
                    geometry: model.geometry.clone(),
                    pose: Pose::new(Point::from_array(o.position), o.yaw_deg.to_radians(), o.scale),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            objects,
            floor: self.floor.clone(),
            walls: self.walls.clone(),
            entry: self.entry.clone(),
        })
    }

    /// Loads a scene file and the catalog it references.
    pub fn load(path: &Path) -> Result<(Scene, Vec<CatalogModel>)> {
        let file: SceneFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let catalog = CatalogManifest::load(&dir.join(&file.catalog))?;
        let scene = file.instantiate(&catalog)?;
        Ok((scene, catalog))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_containment() {
        let sq = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        assert!(point_in_polygon(&sq, 1.0, 1.0));
        assert!(!point_in_polygon(&sq, 3.0, 1.0));
    }
}
