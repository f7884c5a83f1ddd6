use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_k = k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { dt, steps })
    }

    /// Grid covering `[0, duration]` with step at most `max_dt`.
    pub fn covering(duration: f64, max_dt: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Config(format!("duration must be positive, got {duration}")));
        }
        let steps = (duration / max_dt).ceil().max(1.0) as usize;
        TimeGrid::new(duration / steps as f64, steps)
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.dt * (k as f64 + 0.5)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.steps).map(|k| self.midpoint(k)).collect()
    }

    /// Same step count and step within relative `1e-12`.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps && (self.dt - other.dt).abs() <= 1e-12 * self.dt.abs()
    }
}
