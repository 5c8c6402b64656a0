// SPDX-License-Identifier: Apache-2.0
//! Simulated quantum workers: exact statevectors, shot sampling, optional
//! CNOT depolarizing noise and a deterministic job scheduler.

mod noise;
mod scheduler;
mod statevector;

pub use noise::{apply_noise, evolve_density, NoiseModel, MAX_DENSITY_WIDTH};
pub use scheduler::{
    canonical_json, job_seed, run_schedule, BlockTag, CrashHook, DimTag, JobOutcome, JobResult, JobSpec,
    ScheduleOptions,
};
pub use statevector::{
    apply_gate, apply_gates, sample, sample_probabilities, simulate, simulate_from, ShotHistogram, Statevector,
    MAX_STATEVECTOR_WIDTH,
};

#[derive(Debug, thiserror::Error)]
pub enum QsimError {
    #[error("circuit width {width} exceeds limit {limit}")]
    TooWide { width: usize, limit: usize },
    #[error("state width {state} does not match circuit width {circuit}")]
    WidthMismatch { state: usize, circuit: usize },
    #[error("shots must be at least 1")]
    NoShots,
    #[error("depolarizing probability {0} outside [0, 1]")]
    BadNoise(f64),
    #[error("duplicate job key {0}")]
    DuplicateKey(String),
}
