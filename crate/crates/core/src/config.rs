//! Run configuration: defaults, overridden by an optional JSON file,
//! overridden by command-line flags. The effective configuration is echoed
//! next to every output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{RpeOptions, DEFAULT_ASSOCIATION_TOLERANCE, DEFAULT_BIN_WIDTH};
use crate::filters::{DrorParams, DsorParams, RorParams, SorParams};
use crate::grid::{
    BeamModel, GridConfig, WindowMode, DEFAULT_APERTURE_DEG, DEFAULT_CELL_SIZE, DEFAULT_COLLISION_AREA, DEFAULT_HALF_EXTENT,
    DEFAULT_STRIP_HALF_HEIGHT, DEFAULT_WINDOW_TAU,
};
use crate::visibility::{VisibilityParams, Weighting, DEFAULT_AVERAGING_RADIUS, DEFAULT_P};

pub const DEFAULT_SUBSAMPLE_FRACTION: f64 = 0.7;
pub const DEFAULT_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cell_size: f64,
    pub half_extent: f64,
    pub window_tau: f64,
    pub window_mode: WindowMode,
    pub aperture_deg: f64,
    pub collision_area: f64,
    pub strip_half_height: f64,
    pub p: f64,
    pub averaging_radius: f64,
    pub weighting: Weighting,
    pub persistent_hit_ratio: Option<f64>,
    /// Spacing of visibility queries, seconds.
    pub step: f64,
    pub seed: u64,
    pub ror: RorParams,
    pub sor: SorParams,
    pub dror: DrorParams,
    pub dsor: DsorParams,
    pub subsample_fraction: f64,
    pub rpe: RpeOptions,
    pub bin_width: f64,
    pub association_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cell_size: DEFAULT_CELL_SIZE,
            half_extent: DEFAULT_HALF_EXTENT,
            window_tau: DEFAULT_WINDOW_TAU,
            window_mode: WindowMode::Centered,
            aperture_deg: DEFAULT_APERTURE_DEG,
            collision_area: DEFAULT_COLLISION_AREA,
            strip_half_height: DEFAULT_STRIP_HALF_HEIGHT,
            p: DEFAULT_P,
            averaging_radius: DEFAULT_AVERAGING_RADIUS,
            weighting: Weighting::Observations,
            persistent_hit_ratio: None,
            step: DEFAULT_STEP,
            seed: 0,
            ror: RorParams::default(),
            sor: SorParams::default(),
            dror: DrorParams::default(),
            dsor: DsorParams::default(),
            subsample_fraction: DEFAULT_SUBSAMPLE_FRACTION,
            rpe: RpeOptions::default(),
            bin_width: DEFAULT_BIN_WIDTH,
            association_tolerance: DEFAULT_ASSOCIATION_TOLERANCE,
        }
    }
}

impl RunConfig {
    /// Defaults, or the defaults overlaid with the fields present in `path`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig { cell_size: self.cell_size, half_extent: self.half_extent, window_tau: self.window_tau, window_mode: self.window_mode }
    }

    pub fn beam(&self) -> BeamModel<f64> {
        BeamModel {
            aperture: self.aperture_deg.to_radians(),
            collision_area: self.collision_area,
            strip_half_height: self.strip_half_height,
        }
    }

    pub fn visibility(&self) -> VisibilityParams {
        VisibilityParams {
            p: self.p,
            averaging_radius: self.averaging_radius,
            weighting: self.weighting,
            persistent_hit_ratio: self.persistent_hit_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().validate()?;
        self.beam().validate()?;
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("p must be in (0, 1), got {}", self.p)));
        }
        if !(self.averaging_radius > 0.0) || !(self.step > 0.0) || !(self.bin_width > 0.0) {
            return Err(Error::Config("averaging_radius, step and bin_width must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}
