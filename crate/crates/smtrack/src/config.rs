//! Run configuration shared by the CLI and the harnesses: seeded
//! determinism, detection thresholds, loss scaling and tracker knobs, with
//! `key=value` file overrides.

use crate::error::{Error, Result};
use crate::tracker::{CostMetric, StageGates, TrackerParams};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub cost: CostMetric,
    pub tau_high: f64,
    pub tau_low: f64,
    pub nms_iou: f64,
    pub lambda: f64,
    pub timesteps: usize,
    pub d_max: u32,
    pub gates: StageGates,
    pub confirm_hits: u32,
    pub max_lost: u32,
    pub overlap_thresh: f64,
    pub enable_stage3: bool,
    pub enable_tai: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            cost: CostMetric::Iou,
            tau_high: 0.6,
            tau_low: 0.1,
            nms_iou: 0.7,
            lambda: 0.8,
            timesteps: 2,
            d_max: 4,
            gates: StageGates::default(),
            confirm_hits: 2,
            max_lost: 30,
            overlap_thresh: 0.5,
            enable_stage3: true,
            enable_tai: true,
        }
    }
}

impl RunConfig {
    pub fn tracker_params(&self) -> TrackerParams {
        TrackerParams {
            gates: self.gates,
            metric: self.cost,
            confirm_hits: self.confirm_hits,
            max_lost: self.max_lost,
            overlap_thresh: self.overlap_thresh,
            enable_stage3: self.enable_stage3,
            enable_tai: self.enable_tai,
        }
    }

    /// Apply one `key=value` override.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: std::num::ParseFloatError| Error::Validation(format!("{key}: {e}"));
        let bad_int = |e: std::num::ParseIntError| Error::Validation(format!("{key}: {e}"));
        match key {
            "seed" => self.seed = value.parse().map_err(bad_int)?,
            "cost" => {
                self.cost = match value {
                    "iou" => CostMetric::Iou,
                    "nwd" => CostMetric::Nwd,
                    other => {
                        return Err(Error::Validation(format!(
                            "cost must be iou or nwd, got '{other}'"
                        )))
                    }
                }
            }
            "tau_high" => self.tau_high = value.parse().map_err(bad)?,
            "tau_low" => self.tau_low = value.parse().map_err(bad)?,
            "nms_iou" => self.nms_iou = value.parse().map_err(bad)?,
            "lambda" => self.lambda = value.parse().map_err(bad)?,
            "timesteps" => self.timesteps = value.parse().map_err(bad_int)?,
            "d_max" | "dmax" => self.d_max = value.parse().map_err(bad_int)?,
            "gate_high" => self.gates.high = value.parse().map_err(bad)?,
            "gate_low" => self.gates.low = value.parse().map_err(bad)?,
            "gate_suppressed" => self.gates.suppressed = value.parse().map_err(bad)?,
            "confirm_hits" => self.confirm_hits = value.parse().map_err(bad_int)?,
            "max_lost" => self.max_lost = value.parse().map_err(bad_int)?,
            "overlap_thresh" => self.overlap_thresh = value.parse().map_err(bad)?,
            "enable_stage3" => self.enable_stage3 = parse_bool(key, value)?,
            "enable_tai" => self.enable_tai = parse_bool(key, value)?,
            other => return Err(Error::Validation(format!("unknown config key '{other}'"))),
        }
        self.validate()
    }

    /// Load `key=value` lines ('#' comments allowed).
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let text = std::fs::read_to_string(path.as_ref())?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Validation(format!(
                    "config line '{line}' is not key=value"
                )));
            };
            self.apply_kv(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau_low && self.tau_low < self.tau_high && self.tau_high <= 1.0) {
            return Err(Error::Validation(format!(
                "need 0 <= tau_low < tau_high <= 1, got {} and {}",
                self.tau_low, self.tau_high
            )));
        }
        if !(0.0 < self.nms_iou && self.nms_iou < 1.0) {
            return Err(Error::Validation(format!("nms_iou {} outside (0,1)", self.nms_iou)));
        }
        if !(0.0 < self.overlap_thresh && self.overlap_thresh < 1.0) {
            return Err(Error::Validation(format!(
                "overlap_thresh {} outside (0,1)",
                self.overlap_thresh
            )));
        }
        if self.lambda <= 0.0 {
            return Err(Error::Validation(format!("lambda {} must be > 0", self.lambda)));
        }
        Ok(())
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Validation(format!("{key}: invalid bool '{other}'"))),
    }
}
