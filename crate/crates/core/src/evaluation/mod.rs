//! Benchmark metrics: coverage, Rand Index, recognition rates.

pub mod coverage;
pub mod episode;
pub mod recognition;
pub mod segmentation;

use std::io::Write;

use crate::error::Result;

pub use coverage::{
    coverage_quality, coverage_rate, quality_at, view_quality, CoverageReport, CoverageTracker, GtSurface,
    QualityParams,
};
pub use episode::{
    coverage_curve, detected_objects, evaluate_episode, EpisodeEvaluation, MetricsObserver, RecognitionCoverage,
};
pub use recognition::{recognition_metrics, Detection, MetricsReport};
pub use segmentation::{rand_index, transfer_gt_segmentation, GtLabeler};

/// Writes a header line and one comma-separated row per sample.
pub fn write_csv(mut w: impl Write, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
