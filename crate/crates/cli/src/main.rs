// SPDX-License-Identifier: Apache-2.0
//! `qdyn`: staged driver for the channel-factorized wavepacket pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdyn_core::pipeline::{self, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "qdyn", version, about = "Quantum wavepacket dynamics on emulated hardware")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Two-qubit depolarizing probability.
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// Exact probabilities instead of sampled shots.
    #[arg(long, global = true)]
    statevector: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Grids, kinetic operators, surface, 2-D Hamiltonian and channel factorization.
    Build,
    /// Redo only the channel factorization from an existing build.
    Factorize,
    /// Compile one circuit per simulation time point.
    Compile,
    /// Execute pending jobs; finished ones are skipped.
    Run,
    /// Spectra, peaks, ladders and error metrics.
    Analyze,
    /// Re-render the report from the stored analysis.
    Report,
    /// Every stage in order.
    All,
    /// Print the effective configuration as TOML.
    Config,
}

fn load(c: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = c.shots {
        cfg.shots = s;
    }
    if let Some(p) = c.noise {
        cfg.noise = p;
    }
    cfg.statevector |= c.statevector;
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load(&cli.common)?;
    match cli.command {
        Command::Build => {
            let s = pipeline::cmd_build(&cfg)?;
            println!(
                "built {}x{} Hamiltonian {}; channel rank {}; block residuals {:.1e}, {:.1e}",
                s.h2d_dimension, s.h2d_dimension, s.hamiltonian_id, s.channel_rank, s.offdiag_residual[0], s.offdiag_residual[1]
            );
        }
        Command::Factorize => {
            let s = pipeline::cmd_factorize(&cfg)?;
            println!("factorized: rank {}, Hamiltonian {}", s.channel_rank, s.hamiltonian_id);
        }
        Command::Compile => {
            let s = pipeline::cmd_compile(&cfg)?;
            println!("compiled {} circuits; max distance {:.2e}", s.total_circuits(), s.max_distance());
        }
        Command::Run => {
            let s = pipeline::cmd_run(&cfg, None)?;
            println!("{}: executed {}, skipped {} of {} jobs", s.mode, s.executed, s.skipped, s.total_jobs);
        }
        Command::Analyze => {
            let a = pipeline::cmd_analyze(&cfg)?;
            summarize(&a);
        }
        Command::Report => {
            pipeline::cmd_report(&cfg)?;
            println!("report written to {}", cfg.output_dir.join("report").display());
        }
        Command::All => {
            let a = pipeline::run_all(&cfg)?;
            summarize(&a);
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn summarize(a: &pipeline::Analysis) {
    println!("max ΔΨ {:.4}", a.max_delta_psi);
    for l in &a.ladders {
        match (&l.mae_kcal, &l.error) {
            (Some(m), _) => println!("{} ladder MAE {m:.4} kcal/mol", l.dim),
            (None, Some(e)) => println!("{} ladder failed: {e}", l.dim),
            _ => println!("{} ladder unavailable", l.dim),
        }
    }
    if let Some(m) = a.ladder_2d_mae_kcal {
        println!("2-D ladder MAE {m:.4} kcal/mol over {} levels", a.mae_levels);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
