//! Anatomical acceptance thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds in voxel units on the preprocessed grid.
///
/// Loadable from a `key = value` file (TOML syntax) where every key is one of
/// the field names; missing keys keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationRules {
    pub kidney_min_volume: f64,
    pub kidney_z_min: f64,
    pub kidney_z_max: f64,
    pub kidney_min_frames: usize,
    pub tumor_min_volume: f64,
    pub tumor_z_min: f64,
    pub tumor_z_max: f64,
    pub tumor_min_major: f64,
    pub tumor_min_minor: f64,
    pub tumor_min_frames: usize,
    pub tumor_min_sphericity: f64,
}

impl Default for ValidationRules {
    fn default() -> Self {
        Self {
            kidney_min_volume: 19_000.0,
            kidney_z_min: 0.20,
            kidney_z_max: 0.80,
            kidney_min_frames: 2,
            tumor_min_volume: 350.0,
            tumor_z_min: 0.10,
            tumor_z_max: 0.90,
            tumor_min_major: 10.0,
            tumor_min_minor: 3.0,
            tumor_min_frames: 2,
            tumor_min_sphericity: 0.29,
        }
    }
}

impl ValidationRules {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("kidney_min_volume", self.kidney_min_volume),
            ("kidney_min_frames", self.kidney_min_frames as f64),
            ("tumor_min_volume", self.tumor_min_volume),
            ("tumor_min_major", self.tumor_min_major),
            ("tumor_min_minor", self.tumor_min_minor),
            ("tumor_min_frames", self.tumor_min_frames as f64),
            ("tumor_min_sphericity", self.tumor_min_sphericity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, lo, hi) in [
            ("kidney z band", self.kidney_z_min, self.kidney_z_max),
            ("tumor z band", self.tumor_z_min, self.tumor_z_max),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::Config(format!("{name} [{lo}, {hi}] is not inside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let rules: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        rules.check()?;
        Ok(rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_config_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
