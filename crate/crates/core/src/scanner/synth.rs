//! Procedural furniture catalog and random room layouts.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point, Pose};
use crate::scanner::io::write_obj;
use crate::scanner::mesh::{Geometry, TriangleMesh};
use crate::scanner::scene::{
    CatalogEntryFile, CatalogManifest, CatalogModel, EntryPose, Floor, GroundTruthObject, ObjectPlacement, Scene,
    SceneFile, Wall, CATALOG_FORMAT_VERSION, SCENE_FORMAT_VERSION,
};

fn bx(m: &mut TriangleMesh, x0: f64, y0: f64, z0: f64, x1: f64, y1: f64, z1: f64) {
    m.add_box(Point::new(x0, y0, z0), Point::new(x1, y1, z1));
}

/// Four square legs under a `w` by `d` rectangle centered at the origin.
fn legs(m: &mut TriangleMesh, w: f64, d: f64, h: f64, t: f64) {
    let (hx, hy) = (w / 2.0, d / 2.0);
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let cx = sx * (hx - t / 2.0);
        let cy = sy * (hy - t / 2.0);
        bx(m, cx - t / 2.0, cy - t / 2.0, 0.0, cx + t / 2.0, cy + t / 2.0, h);
    }
}

fn chair(w: f64, seat_h: f64, back_h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    let t = 0.04;
    legs(&mut m, w, w, seat_h - t, t);
    bx(&mut m, -w / 2.0, -w / 2.0, seat_h - t, w / 2.0, w / 2.0, seat_h);
    bx(&mut m, -w / 2.0, w / 2.0 - t, seat_h, w / 2.0, w / 2.0, seat_h + back_h);
    m
}

fn table(w: f64, d: f64, h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    let t = 0.04;
    legs(&mut m, w, d, h - t, 0.05);
    bx(&mut m, -w / 2.0, -d / 2.0, h - t, w / 2.0, d / 2.0, h);
    m
}

fn round_table(r: f64, h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    m.add_cylinder(Point::ZERO, 0.3 * r + 0.1, 0.03, 20);
    m.add_cylinder(Point::new(0.0, 0.0, 0.03), 0.06, h - 0.07, 12);
    m.add_cylinder(Point::new(0.0, 0.0, h - 0.04), r, 0.04, 28);
    m
}

fn stool(r: f64, h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    legs(&mut m, 1.2 * r, 1.2 * r, h - 0.04, 0.03);
    m.add_cylinder(Point::new(0.0, 0.0, h - 0.04), r, 0.04, 24);
    m
}

fn desk(w: f64, d: f64, h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    let t = 0.04;
    bx(&mut m, -w / 2.0, -d / 2.0, 0.0, -w / 2.0 + t, d / 2.0, h - t);
    bx(&mut m, w / 2.0 - t, -d / 2.0, 0.0, w / 2.0, d / 2.0, h - t);
    bx(&mut m, -w / 2.0 + t, d / 2.0 - t, 0.3, w / 2.0 - t, d / 2.0, h - t);
    bx(&mut m, -w / 2.0, -d / 2.0, h - t, w / 2.0, d / 2.0, h);
    m
}

fn bookshelf(w: f64, d: f64, h: f64, shelves: usize) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    let t = 0.03;
    bx(&mut m, -w / 2.0, -d / 2.0, 0.0, -w / 2.0 + t, d / 2.0, h);
    bx(&mut m, w / 2.0 - t, -d / 2.0, 0.0, w / 2.0, d / 2.0, h);
    bx(&mut m, -w / 2.0 + t, d / 2.0 - 0.01, 0.0, w / 2.0 - t, d / 2.0, h);
    for i in 0..shelves {
        let z = 0.05 + (h - 0.05 - t) * i as f64 / (shelves - 1) as f64;
        bx(&mut m, -w / 2.0 + t, -d / 2.0, z, w / 2.0 - t, d / 2.0 - 0.01, z + t);
    }
    m
}

fn sofa(w: f64, d: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    let arm = 0.18;
    legs(&mut m, w, d, 0.1, 0.05);
    bx(&mut m, -w / 2.0 + arm, -d / 2.0, 0.1, w / 2.0 - arm, d / 2.0, 0.42);
    bx(&mut m, -w / 2.0 + arm, d / 2.0 - 0.2, 0.42, w / 2.0 - arm, d / 2.0, 0.85);
    bx(&mut m, -w / 2.0, -d / 2.0, 0.1, -w / 2.0 + arm, d / 2.0, 0.62);
    bx(&mut m, w / 2.0 - arm, -d / 2.0, 0.1, w / 2.0, d / 2.0, 0.62);
    m
}

fn lamp(h: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    m.add_cylinder(Point::ZERO, 0.16, 0.03, 20);
    m.add_cylinder(Point::new(0.0, 0.0, 0.03), 0.02, h - 0.33, 8);
    m.add_cylinder(Point::new(0.0, 0.0, h - 0.3), 0.22, 0.3, 24);
    m
}

fn bed(w: f64, l: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new();
    legs(&mut m, w, l, 0.15, 0.06);
    bx(&mut m, -w / 2.0, -l / 2.0, 0.15, w / 2.0, l / 2.0, 0.45);
    bx(&mut m, -w / 2.0, l / 2.0 - 0.06, 0.15, w / 2.0, l / 2.0, 1.0);
    m
}

/// The built-in labeled catalog. Every model stands upright with its base
/// on z = 0, centered over the origin.
pub fn catalog() -> Vec<CatalogModel> {
    let entries: Vec<(&str, &str, TriangleMesh)> = vec![
        ("chair_a", "chair", chair(0.45, 0.45, 0.45)),
        ("chair_b", "chair", chair(0.52, 0.42, 0.6)),
        ("stool_a", "stool", stool(0.18, 0.62)),
        ("table_a", "table", table(1.2, 0.8, 0.75)),
        ("table_round", "table", round_table(0.5, 0.74)),
        ("desk_a", "desk", desk(1.3, 0.65, 0.74)),
        ("bookshelf_a", "bookshelf", bookshelf(0.9, 0.35, 1.6, 5)),
        ("sofa_a", "sofa", sofa(1.8, 0.85)),
        ("lamp_a", "lamp", lamp(1.5)),
        ("bed_a", "bed", bed(1.4, 2.0)),
    ];
    entries
        .into_iter()
        .map(|(id, label, mesh)| CatalogModel {
            id: id.to_string(),
            label: label.to_string(),
            geometry: Geometry::Mesh(mesh),
        })
        .collect()
}

/// Writes one OBJ per model plus `catalog.json` into `dir`. Returns the
/// manifest path.
pub fn write_catalog(dir: &Path, models: &[CatalogModel]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for m in models {
        let Geometry::Mesh(mesh) = &m.geometry else {
            return Err(Error::InvalidParameter(format!("model {} is not a mesh", m.id)));
        };
        let file = PathBuf::from(format!("{}.obj", m.id));
        write_obj(mesh, std::io::BufWriter::new(std::fs::File::create(dir.join(&file))?))?;
        entries.push(CatalogEntryFile {
            id: m.id.clone(),
            file,
            label: m.label.clone(),
        });
    }
    let manifest = CatalogManifest {
        format_version: CATALOG_FORMAT_VERSION,
        models: entries,
    };
    let path = dir.join("catalog.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct LayoutParams {
    /// Square room side, meters.
    pub room: f64,
    pub wall_height: f64,
    pub n_objects: usize,
    /// Minimum free gap between object footprints, meters.
    pub clearance: f64,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            room: 5.0,
            wall_height: 2.5,
            n_objects: 5,
            clearance: 0.5,
            seed: 0,
        }
    }
}

/// Random non-overlapping placement of distinct catalog models in a walled
/// square room. The entry point is a free corner position.
pub fn random_scene(models: &[CatalogModel], params: &LayoutParams) -> Result<Scene> {
    if params.n_objects > models.len() {
        return Err(Error::InvalidParameter("more objects than catalog models".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..100 {
        if let Some(scene) = try_layout(models, params, &mut rng)? {
            return Ok(scene);
        }
    }
    Err(Error::InvalidParameter("room too small for the requested layout".into()))
}

fn try_layout(models: &[CatalogModel], params: &LayoutParams, rng: &mut ChaCha8Rng) -> Result<Option<Scene>> {
    let s = params.room;
    let entry = [0.5, 0.5];
    let mut order: Vec<usize> = (0..models.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut objects: Vec<GroundTruthObject> = Vec::new();
    let mut discs: Vec<(f64, f64, f64)> = Vec::new();
    for &mi in order.iter().take(params.n_objects) {
        let model = &models[mi];
        let b = model.geometry.aabb().ok_or(Error::EmptyCloud)?;
        let e = b.extent();
        let radius = 0.5 * (e.x * e.x + e.y * e.y).sqrt();
        let margin = radius + 0.15;
        let mut placed = false;
        for _ in 0..500 {
            let x = rng.random_range(margin..s - margin);
            let y = rng.random_range(margin..s - margin);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let clear_entry = ((x - entry[0]).powi(2) + (y - entry[1]).powi(2)).sqrt() > radius + 0.8;
            let free = discs
                .iter()
                .all(|&(ox, oy, or)| ((x - ox).powi(2) + (y - oy).powi(2)).sqrt() >= radius + or + params.clearance);
            if clear_entry && free {
                discs.push((x, y, radius));
                objects.push(GroundTruthObject {
                    id: objects.len() as u32,
                    label: model.label.clone(),
                    model_id: model.id.clone(),
                    geometry: model.geometry.clone(),
                    pose: Pose::new(Point::new(x, y, 0.0), yaw, 1.0),
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Ok(None);
        }
    }
    let corners = [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]];
    let walls = (0..4)
        .map(|i| Wall {
            from: corners[i],
            to: corners[(i + 1) % 4],
            height: params.wall_height,
        })
        .collect();
    Ok(Some(Scene {
        objects,
        floor: Floor {
            height: 0.0,
            polygon: corners.to_vec(),
        },
        walls,
        entry: EntryPose {
            position: entry,
            height: 1.2,
        },
    }))
}

/// Scene file form of `scene`, referencing `catalog` by relative path.
pub fn scene_file(scene: &Scene, catalog: &Path) -> SceneFile {
    SceneFile {
        format_version: SCENE_FORMAT_VERSION,
        catalog: catalog.to_path_buf(),
        floor: scene.floor.clone(),
        walls: scene.walls.clone(),
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectPlacement {
                model: o.model_id.clone(),
                position: o.pose.translation.to_array(),
                yaw_deg: o.pose.yaw.to_degrees(),
                scale: o.pose.scale,
            })
            .collect(),
        entry: scene.entry.clone(),
    }
}
