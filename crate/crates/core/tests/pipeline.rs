// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use qdyn_core::grid::{build_grid, format_pes, synthetic_pes, SyntheticPesParams};
use qdyn_core::pipeline::{
    cmd_analyze, cmd_build, cmd_compile, cmd_run, run_all, PipelineConfig, PipelineError, ResultsStore, SimulationConfig,
};
use qdyn_core::qsim::{BlockTag, DimTag};
use qdyn_core::units::{CoordUnit, EnergyUnit};

fn small(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        output_dir: dir.to_path_buf(),
        workers: 2,
        simulations: vec![
            SimulationConfig { dim: DimTag::X1, block: BlockTag::Upper, initial: vec![1] },
            SimulationConfig { dim: DimTag::X1, block: BlockTag::Lower, initial: vec![8] },
            SimulationConfig { dim: DimTag::X1, block: BlockTag::Full, initial: vec![2] },
        ],
        ..PipelineConfig::default()
    }
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/qdyn.toml");
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
}

#[test]
fn statevector_pipeline_tracks_classical_dynamics() {
    let tmp = tempfile::tempdir().unwrap();
    // a block ladder needs every initial state to expose all of its gaps
    let simulations = PipelineConfig::default().simulations.into_iter().filter(|s| s.dim == DimTag::X1).collect();
    let cfg = PipelineConfig { statevector: true, simulations, ..small(tmp.path()) };
    let a = run_all(&cfg).unwrap();
    assert_eq!(a.simulations.len(), 10);
    assert!(a.max_delta_psi < 1e-9, "{}", a.max_delta_psi);
    for f in ["report/report.md", "report/report.json", "spectra/analysis.json", "hamiltonians/exact_ladder.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let x1 = a.ladders.iter().find(|l| l.dim == DimTag::X1).unwrap();
    assert!(x1.mae_kcal.unwrap() < 0.05, "{x1:?}");
}

#[test]
fn rerun_skips_finished_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    cmd_build(&cfg).unwrap();
    cmd_compile(&cfg).unwrap();
    let first = cmd_run(&cfg, None).unwrap();
    assert_eq!(first.executed, 3 * 161);
    let again = cmd_run(&cfg, None).unwrap();
    assert_eq!((again.executed, again.skipped), (0, 3 * 161));
    // other modes keep separate stores
    let sv = cmd_run(&PipelineConfig { statevector: true, ..cfg.clone() }, None).unwrap();
    assert_eq!(sv.executed, 3 * 161);
}

#[test]
fn crashed_jobs_are_retried_or_left_for_the_next_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    cmd_build(&cfg).unwrap();
    cmd_compile(&cfg).unwrap();

    // crash on the first attempt only: everything completes
    let crashes = Arc::new(AtomicUsize::new(0));
    let c = crashes.clone();
    let hook = Arc::new(move |key: &str, attempt: u32| {
        let hit = attempt == 1 && key.ends_with("k0007");
        if hit {
            c.fetch_add(1, Ordering::SeqCst);
        }
        hit
    });
    let s = cmd_run(&cfg, Some(hook)).unwrap();
    assert_eq!(s.executed, 3 * 161);
    assert_eq!(crashes.load(Ordering::SeqCst), 3);
    let store = ResultsStore::new(&tmp.path().join("results").join(cfg.mode_tag()));
    let recs = store.load().unwrap();
    assert!(recs.values().filter(|r| r.key.ends_with("k0007")).all(|r| r.attempts == 2));

    // persistent crashes: the run fails, the rest is stored, the next run finishes
    let cfg = PipelineConfig { seed: 7, ..cfg };
    let hook = Arc::new(|key: &str, _: u32| key.ends_with("k0100"));
    let err = cmd_run(&cfg, Some(hook)).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(matches!(cmd_analyze(&cfg), Err(PipelineError::Incomplete { count: 3, .. })));
    let s = cmd_run(&cfg, None).unwrap();
    assert_eq!(s.executed, 3);
    cmd_analyze(&cfg).unwrap();
}

#[test]
fn stage_order_errors_are_exit_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    for err in [cmd_compile(&cfg).unwrap_err(), cmd_run(&cfg, None).unwrap_err(), cmd_analyze(&cfg).unwrap_err()] {
        assert_eq!(err.exit_code(), 3, "{err}");
    }
    cmd_build(&cfg).unwrap();
    cmd_compile(&cfg).unwrap();
    let err = cmd_analyze(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("empty"), "{err}");
}

#[test]
fn bad_surface_files_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pes.file = Some(tmp.path().join("missing.dat"));
    assert_eq!(cmd_build(&cfg).unwrap_err().exit_code(), 2);

    let garbled = tmp.path().join("garbled.dat");
    std::fs::write(&garbled, "pes v1 8 8 kcalmol 0\n1 2 3\n").unwrap();
    cfg.pes.file = Some(garbled);
    assert_eq!(cmd_build(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn tilted_surface_builds_but_refuses_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    let g1 = build_grid(8, 1.1, CoordUnit::Angstrom).unwrap();
    let g2 = build_grid(8, 70.0, CoordUnit::Degree).unwrap();
    let mut surf = synthetic_pes(&SyntheticPesParams::default(), &g1, &g2).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            surf.values[(i, j)] += 1e-3 * i as f64;
        }
    }
    surf.symmetric = false;
    let path = tmp.path().join("tilted.dat");
    std::fs::write(&path, format_pes(&surf, EnergyUnit::Hartree)).unwrap();
    let cfg = PipelineConfig { pes: qdyn_core::pipeline::PesConfig { file: Some(path), ..Default::default() }, ..small(tmp.path()) };
    let b = cmd_build(&cfg).unwrap();
    assert!(b.offdiag_residual[0] > 1e-6);
    let err = cmd_compile(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}
