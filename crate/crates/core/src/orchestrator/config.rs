//! Episode tunables.

use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::orchestrator::planes::PlaneParams;
use crate::planning::NboWeights;
use crate::segmentation::presegment::PresegParams;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    /// Keypoints per cloud (database build and queries).
    pub n_p: usize,
    /// Similar models kept per retrieval.
    pub n_s: usize,
    /// Candidate views per NBV step.
    pub n_v: usize,
    pub weights: NboWeights,
    /// Objects scoring above this are recognized.
    pub complete_threshold: f64,
    /// Small objects scoring below this are noise.
    pub noise_threshold: f64,
    /// Noise objects have fewer points than this.
    pub noise_max_points: usize,
    pub max_nbv: usize,
    pub camera: CameraModel,
    /// Scene occupancy voxel edge, meters.
    pub scene_resolution: f64,
    pub nav_resolution: f64,
    pub floor_resolution: f64,
    /// Blur of the model occupancy fields, voxels.
    pub blur_sigma: f64,
    pub noise_sigma_rel: f64,
    pub seed: u64,
    pub h_cam: f64,
    /// Robot radius kept clear of obstacles, meters.
    pub clearance: f64,
    pub frontier_standoff: f64,
    pub frontier_pitch_deg: f64,
    pub max_frontier_visits: usize,
    pub adjacency_radius: f64,
    /// Smaller pre-segments join an adjacent component or are dropped.
    pub min_component_points: usize,
    pub r_dedup: f64,
    /// Scan points within this distance of a replaced model's box are
    /// attributed to it.
    pub replacement_margin: f64,
    /// Objects lower than this above the floor do not block the robot.
    pub obstacle_min_height: f64,
    pub preseg: PresegParams,
    pub planes: PlaneParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            n_p: 500,
            n_s: 5,
            n_v: 16,
            weights: NboWeights::default(),
            complete_threshold: 0.96,
            noise_threshold: 0.05,
            noise_max_points: 50,
            max_nbv: 10,
            camera: CameraModel::default(),
            scene_resolution: 0.05,
            nav_resolution: 0.05,
            floor_resolution: 0.1,
            blur_sigma: 1.0,
            noise_sigma_rel: 0.005,
            seed: 0,
            h_cam: 1.2,
            clearance: 0.25,
            frontier_standoff: 1.0,
            frontier_pitch_deg: 25.0,
            max_frontier_visits: 24,
            adjacency_radius: 0.03,
            min_component_points: 30,
            r_dedup: 0.01,
            replacement_margin: 0.05,
            obstacle_min_height: 0.05,
            preseg: PresegParams::default(),
            planes: PlaneParams::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::FormatVersion {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        for (name, t) in [("complete_threshold", self.complete_threshold), ("noise_threshold", self.noise_threshold)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        if self.noise_threshold >= self.complete_threshold {
            return Err(Error::InvalidParameter("noise_threshold must be below complete_threshold".into()));
        }
        if self.n_p == 0 || self.n_s == 0 || self.n_v == 0 || self.max_nbv == 0 {
            return Err(Error::InvalidParameter("n_p, n_s, n_v and max_nbv must be at least 1".into()));
        }
        self.camera.validate()?;
        positive("scene_resolution", self.scene_resolution)?;
        positive("nav_resolution", self.nav_resolution)?;
        positive("floor_resolution", self.floor_resolution)?;
        positive("h_cam", self.h_cam)?;
        positive("r_dedup", self.r_dedup)?;
        positive("adjacency_radius", self.adjacency_radius)?;
        if !(self.noise_sigma_rel >= 0.0 && self.blur_sigma >= 0.0 && self.clearance >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise_sigma_rel, blur_sigma and clearance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Missing fields take their defaults.
    pub fn parse_json(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `self` with every field present in `overrides` replaced; nested
    /// tables merge key by key.
    pub fn overlay(&self, overrides: &serde_json::Value) -> Result<Config> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overrides);
        let cfg: Config = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge(base: &mut serde_json::Value, top: &serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn thresholds_are_checked() {
        let mut c = Config {
            noise_threshold: 0.97,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        c.noise_threshold = 0.0;
        assert!(c.validate().is_err());
        c.noise_threshold = 0.05;
        c.complete_threshold = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = Config::parse_json(r#"{"n_s": 3, "seed": 9}"#).unwrap();
        assert_eq!(c.n_s, 3);
        assert_eq!(c.seed, 9);
        assert_eq!(c.n_v, 16);
        assert!(Config::parse_json(r#"{"bogus": 1}"#).is_err());
        assert!(Config::parse_json(r#"{"schema_version": 2}"#).is_err());
    }

    #[test]
    fn overlay_replaces_only_given_fields() {
        let base = Config {
            seed: 4,
            n_v: 8,
            ..Config::default()
        };
        let c = base
            .overlay(&serde_json::json!({"n_v": 12, "weights": {"w_d": 2.0}}))
            .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.n_v, 12);
        assert_eq!(c.weights.w_d, 2.0);
        assert_eq!(c.weights.w_z, 1.5);
        assert!(base.overlay(&serde_json::json!({"nope": 1})).is_err());
        assert!(base.overlay(&serde_json::json!({"complete_threshold": 2.0})).is_err());
    }
}
