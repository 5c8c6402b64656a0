// SPDX-License-Identifier: Apache-2.0
//! Staged pipeline: build → compile → run → analyze → report, each stage
//! reading the previous stage's artifacts from the output directory.

mod config;
mod report;
mod stages;
mod store;

use std::path::{Path, PathBuf};

pub use config::{AxisConfig, ChannelConfig, PesConfig, PipelineConfig, ScheduleSpec, Schedules, Simulation, SimulationConfig};
pub use report::{cmd_report, render_markdown};
pub use stages::{
    cmd_analyze, cmd_build, cmd_compile, cmd_factorize, cmd_run, run_all, simulation_circuit, CompileEntry, Analysis, BuildSummary, CompileSummary,
    DimEffective, DimLadder, FactorArtifact, GroupAnalysis, ModelArtifact, RunSummary, ScheduleRow, SimAnalysis,
};
pub use store::ResultsStore;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing inputs: {0}")]
    Missing(String),
    #[error("incomplete results: {count} job(s) missing, e.g. {sample:?}")]
    Incomplete { count: usize, sample: Vec<String> },
    #[error("{0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit code: 1 internal, 2 config or parse, 3 incomplete inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Missing(_) | PipelineError::Incomplete { .. } => 3,
            PipelineError::Internal(_) => 1,
        }
    }

    pub(crate) fn internal(e: impl std::fmt::Display) -> Self {
        PipelineError::Internal(e.to_string())
    }
}

/// Output layout under the configured directory.
#[derive(Debug, Clone)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn new(root: &Path) -> Self {
        Paths { root: root.to_path_buf() }
    }

    pub fn hamiltonians(&self) -> PathBuf {
        self.root.join("hamiltonians")
    }

    pub fn channels(&self) -> PathBuf {
        self.root.join("channels")
    }

    pub fn circuits(&self) -> PathBuf {
        self.root.join("circuits")
    }

    pub fn results(&self, mode: &str) -> PathBuf {
        self.root.join("results").join(mode)
    }

    pub fn spectra(&self) -> PathBuf {
        self.root.join("spectra")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Internal(format!("create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::Internal(format!("write {}: {e}", path.display())))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path, stage: &str) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| PipelineError::Missing(format!("{} not found; run `{stage}` first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Internal(format!("corrupt {}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
