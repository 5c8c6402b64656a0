// SPDX-License-Identifier: Apache-2.0
//! Time-resolved grid densities.

use serde::{Deserialize, Serialize};

/// ρ(x, x; k·dt) for k = 0..=n_steps. `slices[k][x]` is the density at
/// basis point `x` and time index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub dt_fs: f64,
    pub slices: Vec<Vec<f64>>,
    #[serde(default)]
    pub label: String,
}

impl TimeTrace {
    pub fn new(dt_fs: f64, slices: Vec<Vec<f64>>) -> Self {
        TimeTrace { dt_fs, slices, label: String::new() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n_times(&self) -> usize {
        self.slices.len()
    }

    pub fn n_points(&self) -> usize {
        self.slices.first().map_or(0, |s| s.len())
    }

    /// Series of one basis point across time.
    pub fn series(&self, x: usize) -> Vec<f64> {
        self.slices.iter().map(|s| s[x]).collect()
    }

    pub fn total_time_fs(&self) -> f64 {
        self.dt_fs * (self.n_times().saturating_sub(1)) as f64
    }

    /// Largest deviation of Σ_x ρ from 1 over all slices.
    pub fn max_norm_drift(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
