// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use super::config::PipelineConfig;
use super::stages::{Analysis, CompileSummary};
use super::{read_json, to_json, write_file, Paths, PipelineError};

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.prec$}"))
}

/// Markdown summary of an analysis, with the compile manifest if present.
pub fn render_markdown(a: &Analysis, compile: Option<&CompileSummary>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# qdyn report\n");
    let _ = writeln!(s, "Hamiltonian `{}`, mode `{}`.\n", a.hamiltonian_id, a.mode);

    let _ = writeln!(s, "## Schedules\n");
    let _ = writeln!(s, "| run | Δt (fs) | T (fs) | steps | Δω (THz) | ω_max (THz) |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for r in &a.schedule_table {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.4} | {:.3} |",
            r.name, r.dt_fs, r.total_fs, r.n_steps, r.d_omega_thz, r.omega_max_thz
        );
    }

    if let Some(c) = compile {
        let _ = writeln!(s, "\n## Circuits\n");
        let _ = writeln!(s, "| simulation | circuits | CNOTs each | max distance |");
        let _ = writeln!(s, "|---|---|---|---|");
        for e in &c.entries {
            let _ = writeln!(s, "| {} | {} | {} | {:.2e} |", e.simulation, e.circuits, e.cnots_per_circuit, e.max_distance);
        }
    }

    let _ = writeln!(s, "\n## Wavepacket error\n");
    let _ = writeln!(s, "| simulation | ΔΨ | peaks | max norm drift |");
    let _ = writeln!(s, "|---|---|---|---|");
    for m in &a.simulations {
        let _ = writeln!(s, "| {} | {:.4} | {} | {:.1e} |", m.id, m.delta_psi, m.peaks.len(), m.max_norm_drift);
    }
    let _ = writeln!(s, "\nLargest ΔΨ: {:.4}.", a.max_delta_psi);

    let _ = writeln!(s, "\n## Cumulative peaks\n");
    for g in &a.groups {
        let peaks: Vec<String> = g.peaks.iter().map(|p| format!("{:.2}", p.freq_thz)).collect();
        let status = if g.all_within_half_bin() {
            format!("all within Δω/2 (max error {:.3} THz)", g.max_peak_error_thz)
        } else {
            format!("unmatched {:?}", g.unmatched_peaks_thz)
        };
        let _ = writeln!(s, "- {} {}: [{}] THz, {status}", g.dim, g.block, peaks.join(", "));
    }

    let _ = writeln!(s, "\n## Ladders\n");
    for l in &a.ladders {
        match &l.reconstructed {
            Some(r) => {
                let got: Vec<String> = r.thz().iter().map(|x| format!("{x:.2}")).collect();
                let want: Vec<String> = l.exact_thz.iter().map(|x| format!("{x:.2}")).collect();
                let _ = writeln!(s, "- {} reconstructed (THz): {}", l.dim, got.join(", "));
                let _ = writeln!(s, "- {} exact (THz): {}", l.dim, want.join(", "));
                let _ = writeln!(s, "- {} MAE {} kcal/mol", l.dim, fmt_opt(l.mae_kcal, 4));
            }
            None => {
                let _ = writeln!(s, "- {} not reconstructed: {}", l.dim, l.error.as_deref().unwrap_or("unknown"));
            }
        }
    }
    let _ = writeln!(
        s,
        "\n2-D ladder MAE over the lowest {} levels: {} kcal/mol.",
        a.mae_levels,
        fmt_opt(a.ladder_2d_mae_kcal, 4)
    );
    s
}

/// Render report/report.md and report/report.json from the stored analysis.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let paths = Paths::new(&cfg.output_dir);
    let a: Analysis = read_json(&paths.spectra().join("analysis.json"), "analyze")?;
    let compile: Option<CompileSummary> = read_json(&paths.circuits().join("manifest.json"), "compile").ok();
    write_file(&paths.report().join("report.md"), render_markdown(&a, compile.as_ref()))?;
    write_file(&paths.report().join("report.json"), to_json(&a))?;
    Ok(())
}
