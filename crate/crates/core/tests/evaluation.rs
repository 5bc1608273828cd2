mod common;

use objscan::camera::{CameraModel, Viewpoint};
use objscan::evaluation::coverage::COVERAGE_RESOLUTION;
use objscan::evaluation::{CoverageTracker, GtLabeler, GtSurface};
use objscan::geometry::Point;
use objscan::scanner::render::{add_noise, depth_to_cloud, render_prepared, PreparedScene};

fn around(center: Point, radius: f64, n: usize) -> Vec<Viewpoint> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let eye = Point::new(center.x + radius * a.cos(), center.y + radius * a.sin(), 1.2);
            Viewpoint::look_at(eye, Point::new(center.x, center.y, 0.4)).unwrap()
        })
        .collect()
}

#[test]
fn noisy_scan_points_inherit_their_source_object() {
    let scene = common::room(
        4.0,
        vec![
            common::place(0, "chair_a", 1.5, 2.0, 0.0),
            common::place(1, "stool_a", 2.7, 2.0, 0.0),
        ],
    );
    let prepared = PreparedScene::from_scene(&scene);
    let cam = CameraModel::default();
    let labeler = GtLabeler::new(&scene);
    let (mut total, mut agree) = (0usize, 0usize);
    for (k, view) in around(Point::new(2.1, 2.0, 0.0), 1.6, 4).iter().enumerate() {
        let img = add_noise(&render_prepared(&prepared, view, &cam), 0.005, k as u64).unwrap();
        let cloud = depth_to_cloud(&img);
        for (p, prov) in cloud.points.iter().zip(&cloud.provenance) {
            let Some(object) = prov.and_then(|s| s.source.object()) else { continue };
            total += 1;
            agree += usize::from(labeler.label(*p) == Some(object));
        }
    }
    assert!(total > 1000, "{total} object points");
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "transfer agreement {rate}");
}

#[test]
fn coverage_grows_with_views_and_stays_bounded() {
    let scene = common::room(4.0, vec![common::place(0, "table_a", 2.0, 2.0, 0.0)]);
    let prepared = PreparedScene::from_scene(&scene);
    let surface = GtSurface::from_scene(&scene, COVERAGE_RESOLUTION).unwrap();
    let mut tracker = CoverageTracker::new(surface, CameraModel::default());
    assert_eq!(tracker.report(&[0]).unwrap().r_cover, 0.0);
    let mut last = (0.0, 0.0);
    for view in around(Point::new(2.0, 2.0, 0.0), 1.5, 8) {
        tracker.add_view(&prepared, &view);
        let r = tracker.report(&[0]).unwrap();
        assert!(r.r_cover >= last.0 && r.q_cover >= last.1);
        assert!(r.q_cover <= r.r_cover && r.r_cover <= 1.0);
        last = (r.r_cover, r.q_cover);
    }
    assert!(last.0 > 0.8, "coverage after a full circle {}", last.0);
    assert_eq!(tracker.report(&[]).unwrap().r_cover, 0.0);
}
