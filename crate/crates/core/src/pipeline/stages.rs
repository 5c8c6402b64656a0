// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{PipelineConfig, Simulation};
use super::store::ResultsStore;
use super::{read_json, to_json, write_file, Paths, PipelineError};
use crate::compiler::{
    append_grid_basis_map, compile_block_diagonal, kak_compile, prepare_delta_state, Circuit, PrepBasis,
};
use crate::grid::{
    assemble_h2d, build_grid, classical_delta_trace, daf_kinetic, exact_eigensolve, format_pes, load_pes,
    synthetic_pes, DafKineticSpec, Grid1D, PotentialSurface,
};
use crate::linalg::{expm_sym, phase_aligned_distance, sym_eigen, RMat};
use crate::qsim::{run_schedule, BlockTag, CrashHook, DimTag, JobOutcome, JobSpec, NoiseModel, ScheduleOptions};
use crate::spectral::{
    cumulate, detect_peaks, fold, kronecker_ladder, ladder_mae, power_spectrum, reconstruct_ladder, trace_fft,
    wavepacket_error, BlockPeaks, EnergyLadder, FullPeaks, Peak, PowerSpectrum, SpectrumOptions,
};
use crate::symmetry::{givens_transform, hadamard_grid_readout, shuffled_lower};
use crate::tensor::{effective_family, factor_potential_propagator, EffectiveHamiltonian, PotentialChannelSet};
use crate::trace::TimeTrace;
use crate::units::{self, EnergyUnit};

/// Blocks count as decoupled below this Givens off-diagonal residual (hartree).
const BLOCK_RESIDUAL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub grid_x1: Grid1D,
    pub grid_x2: Grid1D,
    pub kinetic_x1: RMat,
    pub kinetic_x2: RMat,
    pub surface: PotentialSurface,
    pub h2d: RMat,
    /// Exact 2-D eigenvalues, hartree.
    pub exact_levels: Vec<f64>,
}

/// The dominant-channel effective Hamiltonian of one dimension and its blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEffective {
    pub dim: DimTag,
    pub family: Vec<EffectiveHamiltonian>,
    pub channel: (usize, usize),
    pub hamiltonian: RMat,
    pub upper: RMat,
    /// Lower block in the reversed (shuffled) ordering used by the circuits.
    pub lower: RMat,
    pub offdiag_residual: f64,
    pub levels: Vec<f64>,
    pub upper_levels: Vec<f64>,
    pub lower_levels: Vec<f64>,
}

impl DimEffective {
    pub fn block(&self, block: BlockTag) -> &RMat {
        match block {
            BlockTag::Upper => &self.upper,
            BlockTag::Lower => &self.lower,
            BlockTag::Full => &self.hamiltonian,
        }
    }

    pub fn block_levels(&self, block: BlockTag) -> &[f64] {
        match block {
            BlockTag::Upper => &self.upper_levels,
            BlockTag::Lower => &self.lower_levels,
            BlockTag::Full => &self.levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorArtifact {
    pub hamiltonian_id: String,
    pub channels: PotentialChannelSet,
    pub dims: Vec<DimEffective>,
}

impl FactorArtifact {
    pub fn dim(&self, d: DimTag) -> &DimEffective {
        self.dims.iter().find(|e| e.dim == d).expect("both dimensions present")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub hamiltonian_id: String,
    pub h2d_dimension: usize,
    pub exact_levels: usize,
    pub channel_rank: usize,
    pub offdiag_residual: [f64; 2],
}

fn model_path(p: &Paths) -> std::path::PathBuf {
    p.hamiltonians().join("model.json")
}

fn factor_path(p: &Paths) -> std::path::PathBuf {
    p.channels().join("channels.json")
}

fn build_model(cfg: &PipelineConfig) -> Result<ModelArtifact, PipelineError> {
    let grid = |a: &super::AxisConfig| build_grid(a.points, a.extent, a.unit).map_err(|e| PipelineError::Config(e.to_string()));
    let (g1, g2) = (grid(&cfg.x1)?, grid(&cfg.x2)?);
    let kin = |g: &Grid1D, a: &super::AxisConfig| {
        let spec = DafKineticSpec { sigma: a.daf_sigma * g.spacing, m_daf: a.daf_order, ..DafKineticSpec::for_grid(g, a.mass) };
        daf_kinetic(g, &spec).map_err(|e| PipelineError::Config(e.to_string()))
    };
    let (k1, k2) = (kin(&g1, &cfg.x1)?, kin(&g2, &cfg.x2)?);
    let surface = match &cfg.pes.file {
        Some(path) => load_pes(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?,
        None => synthetic_pes(&cfg.pes.synthetic, &g1, &g2).map_err(|e| PipelineError::Config(e.to_string()))?,
    };
    if surface.n1() != g1.n || surface.n2() != g2.n {
        return Err(PipelineError::Config(format!(
            "surface is {}x{}, grids are {}x{}",
            surface.n1(),
            surface.n2(),
            g1.n,
            g2.n
        )));
    }
    let h = assemble_h2d(&k1, &k2, &surface).map_err(PipelineError::internal)?;
    let exact = exact_eigensolve(&h.matrix).map_err(PipelineError::internal)?;
    Ok(ModelArtifact {
        grid_x1: g1,
        grid_x2: g2,
        kinetic_x1: k1,
        kinetic_x2: k2,
        surface,
        h2d: h.matrix,
        exact_levels: exact.eigenvalues,
    })
}

fn hamiltonian_id(dims: &[DimEffective]) -> String {
    let mut h = Sha256::new();
    for d in dims {
        h.update(serde_json::to_string(&d.hamiltonian).expect("matrix serializes"));
    }
    hex::encode(&h.finalize()[..6])
}

fn factorize(cfg: &PipelineConfig, model: &ModelArtifact) -> Result<FactorArtifact, PipelineError> {
    let set = factor_potential_propagator(&model.surface, cfg.channels.dt_fs, cfg.channels.tol).map_err(PipelineError::internal)?;
    let mut dims = Vec::new();
    for (dim, j, k) in [(DimTag::X1, 1u8, &model.kinetic_x1), (DimTag::X2, 2u8, &model.kinetic_x2)] {
        let family = effective_family(k, &set, j).map_err(PipelineError::internal)?;
        let dominant = family
            .iter()
            .find(|e| e.gamma == 0 && e.beta == 0)
            .ok_or_else(|| PipelineError::Internal(format!("{dim}: dominant channel has no extractable potential")))?;
        let dec = givens_transform(&dominant.matrix).map_err(PipelineError::internal)?;
        let lower = shuffled_lower(&dec.lower);
        let eig = |m: &RMat| sym_eigen(m).0;
        dims.push(DimEffective {
            dim,
            channel: (0, 0),
            hamiltonian: dominant.matrix.clone(),
            levels: eig(&dominant.matrix),
            upper_levels: eig(&dec.upper),
            lower_levels: eig(&lower),
            upper: dec.upper,
            lower,
            offdiag_residual: dec.offdiag_residual,
            family,
        });
    }
    Ok(FactorArtifact { hamiltonian_id: hamiltonian_id(&dims), channels: set, dims })
}

/// Grids, kinetic operators, surface, 2-D Hamiltonian, exact ladder, then the
/// channel factorization.
pub fn cmd_build(cfg: &PipelineConfig) -> Result<BuildSummary, PipelineError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.output_dir);
    let model = build_model(cfg)?;
    write_file(&model_path(&paths), to_json(&model))?;
    write_file(&paths.hamiltonians().join("pes.dat"), format_pes(&model.surface, EnergyUnit::KcalMol))?;
    let mut csv = String::from("index,hartree,relative_kcal_mol,relative_thz\n");
    let e0 = model.exact_levels[0];
    for (i, e) in model.exact_levels.iter().enumerate() {
        let _ = writeln!(csv, "{i},{e:.12e},{:.9},{:.9}", units::hartree_to_kcal(e - e0), units::hartree_to_thz(e - e0));
    }
    write_file(&paths.hamiltonians().join("exact_ladder.csv"), csv)?;
    cmd_factorize(cfg)
}

/// Channel factorization, effective Hamiltonians and symmetry blocks from an
/// existing model.
pub fn cmd_factorize(cfg: &PipelineConfig) -> Result<BuildSummary, PipelineError> {
    let paths = Paths::new(&cfg.output_dir);
    let model: ModelArtifact = read_json(&model_path(&paths), "build")?;
    let fac = factorize(cfg, &model)?;
    write_file(&factor_path(&paths), to_json(&fac))?;
    let mut log = String::new();
    let _ = writeln!(log, "hamiltonian id {}", fac.hamiltonian_id);
    let _ = writeln!(log, "2-D hamiltonian {}x{}", model.h2d.nrows(), model.h2d.ncols());
    let _ = writeln!(log, "surface inversion deviation {:.3e} hartree", model.surface.inversion_deviation());
    let _ = writeln!(log, "channel rank {} (tol {:e}), reconstruction error {:.3e}", fac.channels.rank(), fac.channels.tol, fac.channels.reconstruction_error);
    for d in &fac.dims {
        let _ = writeln!(log, "{} effective family size {}", d.dim, d.family.len());
        let _ = writeln!(log, "{} offdiag residual {:.3e}", d.dim, d.offdiag_residual);
    }
    write_file(&paths.hamiltonians().join("build.log"), log)?;
    Ok(BuildSummary {
        hamiltonian_id: fac.hamiltonian_id.clone(),
        h2d_dimension: model.h2d.nrows(),
        exact_levels: model.exact_levels.len(),
        channel_rank: fac.channels.rank(),
        offdiag_residual: [fac.dims[0].offdiag_residual, fac.dims[1].offdiag_residual],
    })
}

fn job_for(sim: &Simulation, k: usize, id: &str, shots: u64) -> JobSpec {
    JobSpec {
        hamiltonian: id.to_string(),
        block: sim.block,
        dim: sim.dim,
        channel: (0, 0),
        initial: format!("g{}", sim.grid_index + 1),
        time_index: k,
        shots,
    }
}

fn circuit_path(paths: &Paths, sim: &Simulation, k: usize) -> std::path::PathBuf {
    paths.circuits().join(sim.id()).join(format!("k{k:04}.jsonl"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileEntry {
    pub simulation: String,
    pub circuits: usize,
    pub cnots_per_circuit: usize,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileSummary {
    pub hamiltonian_id: String,
    pub entries: Vec<CompileEntry>,
}

impl CompileSummary {
    pub fn total_circuits(&self) -> usize {
        self.entries.iter().map(|e| e.circuits).sum()
    }

    pub fn max_distance(&self) -> f64 {
        self.entries.iter().map(|e| e.max_distance).fold(0.0, f64::max)
    }
}

/// Time-point circuit of one simulation: state preparation, the compiled
/// evolution e^{−iHt}, and for full runs the grid readout map. Returns the
/// circuit and the compile distance of the evolution part.
pub fn simulation_circuit(fac: &FactorArtifact, sim: &Simulation, t_au: f64) -> Result<(Circuit, f64), PipelineError> {
    let d = fac.dim(sim.dim);
    let n = d.hamiltonian.nrows();
    match sim.block {
        BlockTag::Upper | BlockTag::Lower => {
            let h = d.block(sim.block);
            if h.nrows() != 4 {
                return Err(PipelineError::Config(format!("{}: block runs need 4×4 blocks, got {}", sim.id(), h.nrows())));
            }
            let u = expm_sym(h, t_au);
            let evo = kak_compile(&u).map_err(PipelineError::internal)?;
            let dist = phase_aligned_distance(&evo.unitary(), &u);
            let mut c = prepare_delta_state(sim.block_local(n), PrepBasis::Computational, 2)
                .map_err(PipelineError::internal)?
                .then(&evo);
            c.target_checksum = evo.target_checksum;
            Ok((c, dist))
        }
        BlockTag::Full => {
            if n != 8 {
                return Err(PipelineError::Config(format!("{}: full runs need an 8-point grid, got {n}", sim.id())));
            }
            let (u0, u1) = (expm_sym(&d.upper, t_au), expm_sym(&d.lower, t_au));
            let evo = compile_block_diagonal(&u0, &u1).map_err(PipelineError::internal)?;
            let mut target = crate::linalg::CMat::zeros(8, 8);
            target.view_mut((0, 0), (4, 4)).copy_from(&u0);
            target.view_mut((4, 4), (4, 4)).copy_from(&u1);
            let dist = phase_aligned_distance(&evo.unitary(), &target);
            let prep = prepare_delta_state(sim.grid_index, PrepBasis::Shuffled, 3).map_err(PipelineError::internal)?;
            let mut c = append_grid_basis_map(prep.then(&evo)).map_err(PipelineError::internal)?;
            c.target_checksum = evo.target_checksum;
            Ok((c, dist))
        }
    }
}

/// One circuit per (simulation, time point), compiled from the exact
/// evolution operator of that time point.
pub fn cmd_compile(cfg: &PipelineConfig) -> Result<CompileSummary, PipelineError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.output_dir);
    let fac: FactorArtifact = read_json(&factor_path(&paths), "build")?;
    let sims = cfg.expanded();
    for d in &fac.dims {
        let needs_blocks = sims.iter().any(|s| s.dim == d.dim);
        if needs_blocks && d.offdiag_residual > BLOCK_RESIDUAL_LIMIT {
            return Err(PipelineError::Config(format!(
                "{}: surface is not inversion symmetric (block residual {:.3e}); block and full runs need a symmetric surface",
                d.dim, d.offdiag_residual
            )));
        }
    }
    let compiled: Vec<Result<CompileEntry, PipelineError>> = parallel_map(&sims, cfg.workers, |sim| {
        let sched = cfg.schedules.get(sim.dim, sim.block).schedule();
        let mut max_distance: f64 = 0.0;
        let mut cnots = 0;
        for k in 0..=sched.n_steps {
            let (mut c, dist) = simulation_circuit(&fac, sim, sched.time_au(k))?;
            c.time_index = Some(k);
            max_distance = max_distance.max(dist);
            cnots = c.cnot_count();
            write_file(&circuit_path(&paths, sim, k), c.to_jsonl())?;
        }
        Ok(CompileEntry { simulation: sim.id(), circuits: sched.n_steps + 1, cnots_per_circuit: cnots, max_distance })
    });
    let entries = compiled.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = CompileSummary { hamiltonian_id: fac.hamiltonian_id.clone(), entries };
    write_file(&paths.circuits().join("manifest.json"), to_json(&summary))?;
    Ok(summary)
}

/// Order-preserving map over a bounded pool of scoped threads.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = workers.clamp(1, items.len().max(1));
    let mut out: Vec<(usize, R)> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut v = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        v.push((i, f(item)));
                    }
                    v
                })
            })
            .collect();
        hs.into_iter().flat_map(|h| h.join().expect("worker thread")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub total_jobs: usize,
    pub executed: usize,
    pub skipped: usize,
    pub failed: Vec<String>,
}

/// Execute every job not already in the results store. `crash_hook` is a
/// fault-injection point for tests.
pub fn cmd_run(cfg: &PipelineConfig, crash_hook: Option<CrashHook>) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.output_dir);
    let manifest: CompileSummary = read_json(&paths.circuits().join("manifest.json"), "compile")?;
    let fac: FactorArtifact = read_json(&factor_path(&paths), "build")?;
    if manifest.hamiltonian_id != fac.hamiltonian_id {
        return Err(PipelineError::Missing("circuits are stale for the current Hamiltonians; run `compile` again".into()));
    }
    let mode = cfg.mode_tag();
    let store = ResultsStore::new(&paths.results(&mode));
    let mut records = store.load()?;
    let shots = if cfg.statevector { 0 } else { cfg.shots };
    let mut jobs = Vec::new();
    let mut circuits = BTreeMap::new();
    let mut total = 0;
    for sim in cfg.expanded() {
        let sched = cfg.schedules.get(sim.dim, sim.block).schedule();
        for k in 0..=sched.n_steps {
            total += 1;
            let job = job_for(&sim, k, &fac.hamiltonian_id, shots);
            let key = job.key();
            if records.contains_key(&key) {
                continue;
            }
            let path = circuit_path(&paths, &sim, k);
            let text = std::fs::read_to_string(&path)
                .map_err(|_| PipelineError::Missing(format!("{} not found; run `compile` first", path.display())))?;
            let c = Circuit::from_jsonl(&text).map_err(|e| PipelineError::Internal(format!("{}: {e}", path.display())))?;
            circuits.insert(key, c);
            jobs.push(job);
        }
    }
    let noise = if cfg.noise > 0.0 { Some(NoiseModel::new(cfg.noise).map_err(|e| PipelineError::Config(e.to_string()))?) } else { None };
    let opts = ScheduleOptions { workers: cfg.workers, global_seed: cfg.seed, noise, crash_hook };
    let outcomes = run_schedule(&jobs, &circuits, &opts).map_err(PipelineError::internal)?;
    let mut failed = Vec::new();
    let executed = jobs.len();
    for (key, o) in outcomes {
        match o {
            JobOutcome::Done(r) => {
                records.insert(key, r);
            }
            JobOutcome::Failed { error, .. } => failed.push(format!("{key}: {error}")),
        }
    }
    store.save(&records)?;
    let summary = RunSummary { mode, total_jobs: total, executed, skipped: total - executed, failed };
    if !summary.failed.is_empty() {
        return Err(PipelineError::Internal(format!(
            "{} job(s) failed and were not stored; rerun to retry: {:?}",
            summary.failed.len(),
            summary.failed.iter().take(5).collect::<Vec<_>>()
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub name: String,
    pub dt_fs: f64,
    pub total_fs: f64,
    pub n_steps: usize,
    pub d_omega_thz: f64,
    pub omega_max_thz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAnalysis {
    pub id: String,
    pub dim: DimTag,
    pub block: BlockTag,
    /// 1-based grid point of the initial δ.
    pub initial: usize,
    pub delta_psi: f64,
    pub max_norm_drift: f64,
    pub peaks: Vec<Peak>,
    /// max |I(ω;x)| of the raw transform and its bound N_t + 1.
    pub max_spectral_magnitude: f64,
    pub spectral_bound: f64,
    pub oscillation_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnalysis {
    pub dim: DimTag,
    pub block: BlockTag,
    pub d_omega_thz: f64,
    pub sample_rate_thz: f64,
    pub peaks: Vec<Peak>,
    /// Exact gaps, folded into [0, ω_max] for full runs.
    pub exact_gaps_thz: Vec<f64>,
    pub max_peak_error_thz: f64,
    pub unmatched_peaks_thz: Vec<f64>,
}

impl GroupAnalysis {
    pub fn all_within_half_bin(&self) -> bool {
        self.unmatched_peaks_thz.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimLadder {
    pub dim: DimTag,
    pub reconstructed: Option<EnergyLadder>,
    pub error: Option<String>,
    /// Exact levels of the effective Hamiltonian, THz relative to ground.
    pub exact_thz: Vec<f64>,
    pub mae_kcal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub mode: String,
    pub hamiltonian_id: String,
    pub schedule_table: Vec<ScheduleRow>,
    pub simulations: Vec<SimAnalysis>,
    pub groups: Vec<GroupAnalysis>,
    pub ladders: Vec<DimLadder>,
    pub mae_levels: usize,
    pub ladder_2d_mae_kcal: Option<f64>,
    pub exact_2d_kcal: Vec<f64>,
    pub reconstructed_2d_kcal: Vec<f64>,
    pub max_delta_psi: f64,
    pub cauchy_schwarz_ok: bool,
}

/// Quantum trace of one simulation from stored results, in the same basis
/// as the classical reference.
fn quantum_trace(
    sim: &Simulation,
    records: &BTreeMap<String, crate::qsim::JobResult>,
    id: &str,
    shots: u64,
    dt_fs: f64,
    n_steps: usize,
) -> Result<TimeTrace, Vec<String>> {
    let mut slices = Vec::with_capacity(n_steps + 1);
    let mut missing = Vec::new();
    for k in 0..=n_steps {
        let key = job_for(sim, k, id, shots).key();
        match records.get(&key) {
            Some(r) if sim.block == BlockTag::Full => {
                slices.push(hadamard_grid_readout(&r.probabilities, r.probabilities.len()).unwrap_or_default())
            }
            Some(r) => slices.push(r.probabilities.clone()),
            None => missing.push(key),
        }
    }
    if missing.is_empty() {
        Ok(TimeTrace::new(dt_fs, slices).with_label(sim.id()))
    } else {
        Err(missing)
    }
}

fn gaps_of(levels: &[f64]) -> Vec<f64> {
    let mut g = Vec::new();
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            g.push(units::hartree_to_thz(levels[j] - levels[i]));
        }
    }
    g.sort_by(f64::total_cmp);
    g
}

fn trace_csv(q: &TimeTrace, c: &TimeTrace) -> String {
    let n = q.n_points();
    let mut s = String::from("t_fs");
    for x in 0..n {
        let _ = write!(s, ",quantum_{x}");
    }
    for x in 0..n {
        let _ = write!(s, ",classical_{x}");
    }
    s.push('\n');
    for (k, (a, b)) in q.slices.iter().zip(&c.slices).enumerate() {
        let _ = write!(s, "{:.4}", k as f64 * q.dt_fs);
        for v in a.iter().chain(b) {
            let _ = write!(s, ",{v:.9}");
        }
        s.push('\n');
    }
    s
}

/// Spectra, peaks, ladders and error metrics from a complete results store.
pub fn cmd_analyze(cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.output_dir);
    let model: ModelArtifact = read_json(&model_path(&paths), "build")?;
    let fac: FactorArtifact = read_json(&factor_path(&paths), "build")?;
    let mode = cfg.mode_tag();
    let store = ResultsStore::new(&paths.results(&mode));
    let records = store.load()?;
    if records.is_empty() {
        return Err(PipelineError::Missing(format!(
            "results store {} is empty; run `run` first",
            store.records_path().display()
        )));
    }
    let shots = if cfg.statevector { 0 } else { cfg.shots };
    let sims = cfg.expanded();

    let mut missing = Vec::new();
    let mut traces = Vec::new();
    for sim in &sims {
        let sched = cfg.schedules.get(sim.dim, sim.block).schedule();
        match quantum_trace(sim, &records, &fac.hamiltonian_id, shots, sched.dt_fs, sched.n_steps) {
            Ok(t) => traces.push(t),
            Err(m) => missing.extend(m),
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::Incomplete { count: missing.len(), sample: missing.into_iter().take(5).collect() });
    }

    let spectra_dir = paths.spectra();
    let mut sim_out = Vec::new();
    let mut per_group: BTreeMap<(DimTag, BlockTag), Vec<PowerSpectrum>> = BTreeMap::new();
    let mut cs_ok = true;
    for (sim, q) in sims.iter().zip(&traces) {
        let d = fac.dim(sim.dim);
        let sched = cfg.schedules.get(sim.dim, sim.block).schedule();
        let (h, start) = match sim.block {
            BlockTag::Full => (d.block(BlockTag::Full), sim.grid_index),
            b => (d.block(b), sim.block_local(d.hamiltonian.nrows())),
        };
        let c = classical_delta_trace(h, start, &sched).map_err(PipelineError::internal)?;
        let dpsi = wavepacket_error(q, &c).map_err(PipelineError::internal)?;
        let raw = trace_fft(q, SpectrumOptions::RAW).map_err(PipelineError::internal)?;
        let bound = q.n_times() as f64;
        let raw_p = power_spectrum(&raw, sim.id());
        let mag = raw.max_magnitude();
        // sampled densities sum to one exactly, so the bound is never loose by more than rounding
        if mag > bound * (1.0 + 1e-9) || raw_p.values.iter().any(|&v| v > raw_p.bound() * (1.0 + 1e-9)) {
            cs_ok = false;
        }
        let p = power_spectrum(&trace_fft(q, SpectrumOptions::PEAKS).map_err(PipelineError::internal)?, sim.id());
        let peaks = detect_peaks(&p, cfg.peak_floor).map_err(PipelineError::internal)?;
        write_file(&spectra_dir.join(format!("{}.csv", sim.id())), p.to_csv())?;
        write_file(&spectra_dir.join("traces").join(format!("{}.csv", sim.id())), trace_csv(q, &c))?;
        sim_out.push(SimAnalysis {
            id: sim.id(),
            dim: sim.dim,
            block: sim.block,
            initial: sim.grid_index + 1,
            delta_psi: dpsi,
            max_norm_drift: q.max_norm_drift(),
            peaks,
            max_spectral_magnitude: mag,
            spectral_bound: bound,
            oscillation_amplitude: crate::spectral::oscillation_amplitude(q),
        });
        per_group.entry((sim.dim, sim.block)).or_default().push(p);
    }

    let mut groups = Vec::new();
    for ((dim, block), spectra) in &per_group {
        let cum = cumulate(spectra).map_err(PipelineError::internal)?;
        write_file(&spectra_dir.join(format!("cumulative-{dim}-{block}.csv")), cum.to_csv())?;
        let peaks = detect_peaks(&cum, cfg.peak_floor).map_err(PipelineError::internal)?;
        let sched = cfg.schedules.get(*dim, *block).schedule();
        let mut exact = gaps_of(fac.dim(*dim).block_levels(*block));
        if *block == BlockTag::Full {
            exact = exact.iter().map(|g| fold(*g, sched.sample_rate_thz())).collect();
            exact.sort_by(f64::total_cmp);
        }
        let half = cum.d_omega_thz / 2.0;
        let mut max_err: f64 = 0.0;
        let mut unmatched = Vec::new();
        for pk in &peaks {
            let e = exact.iter().map(|g| (g - pk.freq_thz).abs()).fold(f64::INFINITY, f64::min);
            if e > half {
                unmatched.push(pk.freq_thz);
            } else {
                max_err = max_err.max(e);
            }
        }
        groups.push(GroupAnalysis {
            dim: *dim,
            block: *block,
            d_omega_thz: cum.d_omega_thz,
            sample_rate_thz: sched.sample_rate_thz(),
            peaks,
            exact_gaps_thz: exact,
            max_peak_error_thz: max_err,
            unmatched_peaks_thz: unmatched,
        });
    }

    let mut ladders = Vec::new();
    for dim in [DimTag::X1, DimTag::X2] {
        let d = fac.dim(dim);
        let e0 = d.levels[0];
        let exact_thz: Vec<f64> = d.levels.iter().map(|e| units::hartree_to_thz(e - e0)).collect();
        let blocks: Vec<BlockPeaks> = groups
            .iter()
            .filter(|g| g.dim == dim && g.block != BlockTag::Full)
            .map(|g| BlockPeaks {
                block: g.block,
                n_levels: d.block_levels(g.block).len(),
                peaks_thz: g.peaks.iter().map(|p| p.freq_thz).collect(),
                tol_thz: g.d_omega_thz / 2.0,
            })
            .collect();
        let full: Vec<FullPeaks> = groups
            .iter()
            .filter(|g| g.dim == dim && g.block == BlockTag::Full)
            .map(|g| FullPeaks {
                peaks_thz: g.peaks.iter().map(|p| p.freq_thz).collect(),
                heights: g.peaks.iter().map(|p| p.height).collect(),
                sample_rate_thz: g.sample_rate_thz,
                tol_thz: g.d_omega_thz / 2.0,
            })
            .collect();
        let entry = if blocks.is_empty() {
            DimLadder { dim, reconstructed: None, error: Some("no block runs configured".into()), exact_thz, mae_kcal: None }
        } else {
            match reconstruct_ladder(&blocks, &full) {
                Ok(l) => {
                    let exact_kcal: Vec<f64> = exact_thz.iter().map(|x| units::thz_to_kcal(*x)).collect();
                    let mae = ladder_mae(&l.kcal(), &exact_kcal, l.levels.len().min(exact_kcal.len())).ok();
                    DimLadder { dim, reconstructed: Some(l), error: None, exact_thz, mae_kcal: mae }
                }
                Err(e) => DimLadder { dim, reconstructed: None, error: Some(e.to_string()), exact_thz, mae_kcal: None },
            }
        };
        ladders.push(entry);
    }

    let e0 = model.exact_levels[0];
    let exact_2d: Vec<f64> = model.exact_levels.iter().map(|e| units::hartree_to_kcal(e - e0)).collect();
    let (recon_2d, mae_2d) = match (&ladders[0].reconstructed, &ladders[1].reconstructed) {
        (Some(a), Some(b)) => {
            let r = kronecker_ladder(&a.kcal(), &b.kcal());
            let k = cfg.mae_levels.min(r.len()).min(exact_2d.len());
            let mae = ladder_mae(&r, &exact_2d, k).ok();
            (r, mae)
        }
        _ => (Vec::new(), None),
    };

    let schedule_table = cfg
        .schedules
        .rows()
        .iter()
        .map(|(name, s)| {
            let sc = s.schedule();
            ScheduleRow {
                name: name.to_string(),
                dt_fs: s.dt_fs,
                total_fs: s.total_fs,
                n_steps: sc.n_steps,
                d_omega_thz: sc.d_omega_thz(),
                omega_max_thz: sc.omega_max_thz(),
            }
        })
        .collect();

    let analysis = Analysis {
        mode,
        hamiltonian_id: fac.hamiltonian_id.clone(),
        schedule_table,
        max_delta_psi: sim_out.iter().map(|s| s.delta_psi).fold(0.0, f64::max),
        simulations: sim_out,
        groups,
        ladders,
        mae_levels: cfg.mae_levels.min(recon_2d.len()).min(exact_2d.len()),
        ladder_2d_mae_kcal: mae_2d,
        exact_2d_kcal: exact_2d,
        reconstructed_2d_kcal: recon_2d,
        cauchy_schwarz_ok: cs_ok,
    };
    if !analysis.cauchy_schwarz_ok {
        return Err(PipelineError::Internal("spectral Cauchy–Schwarz bound violated".into()));
    }
    write_file(&spectra_dir.join("analysis.json"), to_json(&analysis))?;
    super::report::cmd_report(cfg)?;
    Ok(analysis)
}

/// All stages in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<Analysis, PipelineError> {
    cmd_build(cfg)?;
    cmd_compile(cfg)?;
    cmd_run(cfg, None)?;
    cmd_analyze(cfg)
}
