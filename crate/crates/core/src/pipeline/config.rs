// SPDX-License-Identifier: Apache-2.0
//! Pipeline configuration. Every default mirrors the reference simulation
//! tables; `docs/qdyn.toml` spells them out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::grid::{SimulationSchedule, SyntheticPesParams, DEFAULT_TORSION_MASS};
use crate::qsim::{BlockTag, DimTag};
use crate::units::{CoordUnit, PROTON_MASS_ME};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisConfig {
    pub points: usize,
    /// Total span of the grid, in `unit`.
    pub extent: f64,
    pub unit: CoordUnit,
    /// Electron masses.
    pub mass: f64,
    pub daf_order: usize,
    /// Gaussian width in grid spacings.
    pub daf_sigma: f64,
}

impl AxisConfig {
    fn x1() -> Self {
        AxisConfig { points: 8, extent: 1.1, unit: CoordUnit::Angstrom, mass: PROTON_MASS_ME, daf_order: 20, daf_sigma: 1.5 }
    }

    fn x2() -> Self {
        AxisConfig { points: 8, extent: 70.0, unit: CoordUnit::Degree, mass: DEFAULT_TORSION_MASS, daf_order: 20, daf_sigma: 1.5 }
    }
}

impl Default for AxisConfig {
    fn default() -> Self {
        AxisConfig::x1()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PesConfig {
    /// Tabulated surface; overrides the synthetic one when set.
    pub file: Option<PathBuf>,
    pub synthetic: SyntheticPesParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub dt_fs: f64,
    pub total_fs: f64,
}

impl ScheduleSpec {
    pub fn schedule(&self) -> SimulationSchedule {
        SimulationSchedule::new(self.dt_fs, self.total_fs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedules {
    pub x1_block: ScheduleSpec,
    pub x2_block: ScheduleSpec,
    pub x1_full: ScheduleSpec,
    pub x2_full: ScheduleSpec,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            x1_block: ScheduleSpec { dt_fs: 2.5, total_fs: 400.0 },
            x2_block: ScheduleSpec { dt_fs: 1.47, total_fs: 235.0 },
            x1_full: ScheduleSpec { dt_fs: 100.0, total_fs: 16000.0 },
            x2_full: ScheduleSpec { dt_fs: 7.0, total_fs: 1120.0 },
        }
    }
}

impl Schedules {
    pub fn get(&self, dim: DimTag, block: BlockTag) -> ScheduleSpec {
        match (dim, block) {
            (DimTag::X1, BlockTag::Full) => self.x1_full,
            (DimTag::X2, BlockTag::Full) => self.x2_full,
            (DimTag::X1, _) => self.x1_block,
            (DimTag::X2, _) => self.x2_block,
        }
    }

    pub fn rows(&self) -> [(&'static str, ScheduleSpec); 4] {
        [
            ("x1-upper/lower block", self.x1_block),
            ("x2-upper/lower block", self.x2_block),
            ("x1-full", self.x1_full),
            ("x2-full", self.x2_full),
        ]
    }
}

/// One row of the initial-state table; `initial` lists 1-based grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dim: DimTag,
    pub block: BlockTag,
    pub initial: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Step of the potential propagator that is factorized.
    pub dt_fs: f64,
    /// Discarded-weight tolerance of the channel truncation.
    pub tol: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { dt_fs: 0.25, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub shots: u64,
    /// Two-qubit depolarizing probability per CNOT; 0 disables noise.
    pub noise: f64,
    /// Use exact probabilities instead of sampling.
    pub statevector: bool,
    pub peak_floor: f64,
    /// Levels of the 2-D ladder compared against exact diagonalization.
    pub mae_levels: usize,
    pub channels: ChannelConfig,
    pub x1: AxisConfig,
    pub x2: AxisConfig,
    pub pes: PesConfig,
    pub schedules: Schedules,
    pub simulations: Vec<SimulationConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let row = |dim, block, initial: &[usize]| SimulationConfig { dim, block, initial: initial.to_vec() };
        PipelineConfig {
            output_dir: PathBuf::from("qdyn-out"),
            seed: 2024,
            workers: 4,
            shots: 1000,
            noise: 0.0,
            statevector: false,
            peak_floor: 0.02,
            mae_levels: 64,
            channels: ChannelConfig::default(),
            x1: AxisConfig::x1(),
            x2: AxisConfig::x2(),
            pes: PesConfig::default(),
            schedules: Schedules::default(),
            simulations: vec![
                row(DimTag::X1, BlockTag::Upper, &[1, 2, 3, 4]),
                row(DimTag::X1, BlockTag::Lower, &[5, 6, 7, 8]),
                row(DimTag::X2, BlockTag::Upper, &[1, 2]),
                row(DimTag::X2, BlockTag::Lower, &[6, 7, 8]),
                row(DimTag::X1, BlockTag::Full, &[1, 2]),
                row(DimTag::X2, BlockTag::Full, &[1]),
            ],
        }
    }
}

/// A single (dimension, block, initial grid point) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Simulation {
    pub dim: DimTag,
    pub block: BlockTag,
    /// 0-based grid index of the initial δ.
    pub grid_index: usize,
}

impl Simulation {
    pub fn id(&self) -> String {
        format!("{}-{}-g{}", self.dim, self.block, self.grid_index + 1)
    }

    /// Index of the initial state inside a block run, in the shuffled ordering.
    pub fn block_local(&self, n: usize) -> usize {
        let m = n / 2;
        if self.grid_index >= m {
            n - 1 - self.grid_index
        } else {
            self.grid_index
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative paths inside the file are relative to the file
        if let Some(dir) = path.parent() {
            if let Some(f) = &cfg.pes.file {
                if f.is_relative() {
                    cfg.pes.file = Some(dir.join(f));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn axis(&self, dim: DimTag) -> &AxisConfig {
        match dim {
            DimTag::X1 => &self.x1,
            DimTag::X2 => &self.x2,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, a) in [("x1", &self.x1), ("x2", &self.x2)] {
            if a.points < 4 || !a.points.is_power_of_two() {
                return bad(format!("{name}.points must be a power of two ≥ 4, got {}", a.points));
            }
            if !(a.extent > 0.0 && a.mass > 0.0 && a.daf_sigma > 0.0) {
                return bad(format!("{name}: extent, mass and daf_sigma must be positive"));
            }
        }
        for (name, s) in self.schedules.rows() {
            if !(s.dt_fs > 0.0 && s.total_fs > 0.0 && s.total_fs >= 8.0 * s.dt_fs) {
                return bad(format!("schedule {name}: need dt > 0 and at least 8 steps"));
            }
        }
        if !(self.channels.dt_fs > 0.0 && self.channels.tol > 0.0) {
            return bad("channels.dt_fs and channels.tol must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        if !(self.peak_floor > 0.0 && self.peak_floor < 1.0) {
            return bad(format!("peak_floor must lie in (0, 1), got {}", self.peak_floor));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !self.statevector && self.shots == 0 {
            return bad("shots must be at least 1 unless statevector = true".into());
        }
        if self.simulations.is_empty() {
            return bad("no simulations configured".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.simulations {
            let n = self.axis(s.dim).points;
            if s.initial.is_empty() {
                return bad(format!("{}-{} lists no initial states", s.dim, s.block));
            }
            for &g in &s.initial {
                if g == 0 || g > n {
                    return bad(format!("{}-{}: initial grid point {g} outside 1..={n}", s.dim, s.block));
                }
                if !seen.insert((s.dim, s.block, g)) {
                    return bad(format!("{}-{}: initial grid point {g} listed twice", s.dim, s.block));
                }
            }
        }
        Ok(())
    }

    pub fn expanded(&self) -> Vec<Simulation> {
        let mut out: Vec<Simulation> = self
            .simulations
            .iter()
            .flat_map(|s| s.initial.iter().map(move |&g| Simulation { dim: s.dim, block: s.block, grid_index: g - 1 }))
            .collect();
        out.sort();
        out
    }

    /// Tag separating result stores of different execution modes.
    pub fn mode_tag(&self) -> String {
        let mut t = if self.statevector { "statevector".to_string() } else { format!("shots{}-seed{}", self.shots, self.seed) };
        if self.noise > 0.0 {
            t.push_str(&format!("-p{}", self.noise));
        }
        t
    }
}
