// SPDX-License-Identifier: Apache-2.0
//! Deterministic fan-out of independent circuit jobs over a bounded pool of
//! simulated workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::noise::{apply_noise, NoiseModel};
use super::statevector::{sample_probabilities, simulate, ShotHistogram};
use super::QsimError;
use crate::compiler::Circuit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockTag {
    Upper,
    Lower,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimTag {
    X1,
    X2,
}

impl fmt::Display for BlockTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockTag::Upper => "upper",
            BlockTag::Lower => "lower",
            BlockTag::Full => "full",
        })
    }
}

impl fmt::Display for DimTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimTag::X1 => "x1",
            DimTag::X2 => "x2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub hamiltonian: String,
    pub block: BlockTag,
    pub dim: DimTag,
    /// (γ, β) channel pair of the effective Hamiltonian.
    pub channel: (usize, usize),
    pub initial: String,
    pub time_index: usize,
    /// Zero means exact probabilities, no sampling.
    pub shots: u64,
}

impl JobSpec {
    /// Stable key; also names the circuit the job runs.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/g{}b{}/{}/k{:04}",
            self.hamiltonian, self.dim, self.block, self.channel.0, self.channel.1, self.initial, self.time_index
        )
    }
}

/// Stable 64-bit seed from the global seed and a job key.
pub fn job_seed(global_seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub key: String,
    /// Measurement distribution; frequencies when sampled.
    pub probabilities: Vec<f64>,
    pub histogram: Option<ShotHistogram>,
    pub shots: u64,
    pub seed: u64,
    pub attempts: u32,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobOutcome {
    Done(JobResult),
    Failed { key: String, attempts: u32, error: String },
}

impl JobOutcome {
    pub fn key(&self) -> &str {
        match self {
            JobOutcome::Done(r) => &r.key,
            JobOutcome::Failed { key, .. } => key,
        }
    }

    pub fn result(&self) -> Option<&JobResult> {
        match self {
            JobOutcome::Done(r) => Some(r),
            JobOutcome::Failed { .. } => None,
        }
    }
}

/// Test hook: return true to make the given (key, attempt) panic inside the worker.
pub type CrashHook = Arc<dyn Fn(&str, u32) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct ScheduleOptions {
    pub workers: usize,
    pub global_seed: u64,
    pub noise: Option<NoiseModel>,
    pub crash_hook: Option<CrashHook>,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions { workers: 1, global_seed: 0, noise: None, crash_hook: None }
    }
}

fn execute(job: &JobSpec, circuit: &Circuit, seed: u64, noise: Option<&NoiseModel>) -> Result<(Vec<f64>, Option<ShotHistogram>), QsimError> {
    let probs = match noise {
        Some(m) if m.p > 0.0 => apply_noise(circuit, m)?,
        _ => simulate(circuit)?.probabilities(),
    };
    if job.shots == 0 {
        return Ok((probs, None));
    }
    let h = sample_probabilities(&probs, job.shots, seed)?;
    Ok((h.frequencies(), Some(h)))
}

fn run_one(job: &JobSpec, circuit: Option<&Circuit>, opts: &ScheduleOptions) -> JobOutcome {
    let key = job.key();
    let seed = job_seed(opts.global_seed, &key);
    let Some(circuit) = circuit else {
        return JobOutcome::Failed { key, attempts: 0, error: "no circuit for job".into() };
    };
    let mut last = String::new();
    for attempt in 1..=2u32 {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(|| {
            if let Some(hook) = &opts.crash_hook {
                if hook(&key, attempt) {
                    panic!("injected worker crash");
                }
            }
            execute(job, circuit, seed, opts.noise.as_ref())
        }));
        match res {
            Ok(Ok((probabilities, histogram))) => {
                return JobOutcome::Done(JobResult {
                    key,
                    probabilities,
                    histogram,
                    shots: job.shots,
                    seed,
                    attempts: attempt,
                    wall_time_s: start.elapsed().as_secs_f64(),
                })
            }
            // simulation errors are deterministic, retrying cannot help
            Ok(Err(e)) => return JobOutcome::Failed { key, attempts: attempt, error: e.to_string() },
            Err(p) => {
                last = p
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| p.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "worker panicked".into());
            }
        }
    }
    JobOutcome::Failed { key, attempts: 2, error: last }
}

/// Execute every job exactly once and merge outcomes by key. `circuits` maps
/// job keys to circuits. The result does not depend on `opts.workers`.
pub fn run_schedule(
    jobs: &[JobSpec],
    circuits: &BTreeMap<String, Circuit>,
    opts: &ScheduleOptions,
) -> Result<BTreeMap<String, JobOutcome>, QsimError> {
    let mut seen = BTreeSet::new();
    for j in jobs {
        let k = j.key();
        if !seen.insert(k.clone()) {
            return Err(QsimError::DuplicateKey(k));
        }
    }
    let workers = opts.workers.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let batches: Vec<Vec<JobOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        out.push(run_one(job, circuits.get(&job.key()), opts));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread")).collect()
    });
    Ok(batches.into_iter().flatten().map(|o| (o.key().to_string(), o)).collect())
}

/// Canonical JSON of a merged result map with wall times removed.
pub fn canonical_json(results: &BTreeMap<String, JobOutcome>) -> String {
    let stripped: BTreeMap<&String, JobOutcome> = results
        .iter()
        .map(|(k, o)| {
            let mut o = o.clone();
            if let JobOutcome::Done(r) = &mut o {
                r.wall_time_s = 0.0;
            }
            (k, o)
        })
        .collect();
    serde_json::to_string(&stripped).expect("serializable")
}
