#![allow(dead_code)]

use std::sync::OnceLock;

use objscan::database::{build_database, Database, DbParams};
use objscan::geometry::{Point, Pose};
use objscan::scanner::scene::{EntryPose, Floor, GroundTruthObject, Scene, Wall};
use objscan::scanner::synth;

/// Database over the built-in catalog, built once per test binary.
pub fn database() -> &'static Database {
    static DB: OnceLock<Database> = OnceLock::new();
    DB.get_or_init(|| build_database(&synth::catalog(), &DbParams::default()).expect("database build"))
}

/// Walled square room of side `side` with the entry at (0.5, 0.5).
pub fn room(side: f64, objects: Vec<GroundTruthObject>) -> Scene {
    let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
    Scene {
        objects,
        floor: Floor {
            height: 0.0,
            polygon: corners.to_vec(),
        },
        walls: (0..4)
            .map(|i| Wall {
                from: corners[i],
                to: corners[(i + 1) % 4],
                height: 2.5,
            })
            .collect(),
        entry: EntryPose {
            position: [0.5, 0.5],
            height: 1.2,
        },
    }
}

/// Catalog model `model_id` at floor position `(x, y)` turned by `yaw_deg`.
pub fn place(id: u32, model_id: &str, x: f64, y: f64, yaw_deg: f64) -> GroundTruthObject {
    let model = synth::catalog()
        .into_iter()
        .find(|m| m.id == model_id)
        .unwrap_or_else(|| panic!("no catalog model {model_id}"));
    GroundTruthObject {
        id,
        label: model.label,
        model_id: model.id,
        geometry: model.geometry,
        pose: Pose::new(Point::new(x, y, 0.0), yaw_deg.to_radians(), 1.0),
    }
}

/// Five catalog models in a 5 m room.
pub fn office_scene() -> Scene {
    let layout = [
        ("desk_a", 3.8, 1.2, 0.0),
        ("table_a", 1.3, 3.6, 15.0),
        ("bookshelf_a", 4.3, 3.9, -90.0),
        ("chair_a", 2.7, 2.4, 200.0),
        ("stool_a", 1.4, 1.9, 0.0),
    ];
    let objects = layout
        .iter()
        .enumerate()
        .map(|(i, (m, x, y, yaw))| place(i as u32, m, *x, *y, *yaw))
        .collect();
    room(5.0, objects)
}

/// Smallest horizontal gap between the world bounding boxes of any two
/// objects. Boxes enclose footprints, so true gaps are at least this.
pub fn min_footprint_gap(scene: &Scene) -> f64 {
    let boxes: Vec<_> = scene.objects.iter().filter_map(|o| o.world_aabb()).collect();
    let mut gap = f64::INFINITY;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (&boxes[i], &boxes[j]);
            let dx = (b.min.x - a.max.x).max(a.min.x - b.max.x).max(0.0);
            let dy = (b.min.y - a.max.y).max(a.min.y - b.max.y).max(0.0);
            gap = gap.min((dx * dx + dy * dy).sqrt());
        }
    }
    gap
}
