// SPDX-License-Identifier: Apache-2.0
//! Coordinate grids, the DAF kinetic operator, potential surfaces, the 2-D
//! nuclear Hamiltonian and the exact-diagonalization oracle.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{kron, sym_eigen, CVec, RMat, C64};
use crate::trace::TimeTrace;
use crate::units::{self, CoordUnit, EnergyUnit};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("grid extent must be positive, got {0}")]
    BadExtent(f64),
    #[error("invalid DAF parameters: {0}")]
    BadDaf(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("surface is not inversion symmetric (max deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("non-finite potential value at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("matrix is not symmetric (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("initial state is not normalized (norm {0})")]
    Unnormalized(f64),
    #[error("PES parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniform grid centred at zero. Points are stored in internal units
/// (bohr for lengths, radians for angles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub points: Vec<f64>,
    pub n: usize,
    pub spacing: f64,
    pub qubits: u32,
    pub unit: CoordUnit,
}

/// `n` points spanning a total extent `extent` (given in `unit`), centred at 0.
pub fn build_grid(n: usize, extent: f64, unit: CoordUnit) -> Result<Grid1D, GridError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(GridError::NotPowerOfTwo(n));
    }
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(GridError::BadExtent(extent));
    }
    let internal_unit = match unit {
        CoordUnit::Angstrom | CoordUnit::Bohr => CoordUnit::Bohr,
        CoordUnit::Degree | CoordUnit::Radian => CoordUnit::Radian,
    };
    let span = extent * unit.to_internal();
    let spacing = span / (n - 1) as f64;
    let mid = (n - 1) as f64 / 2.0;
    let points = (0..n).map(|i| (i as f64 - mid) * spacing).collect();
    Ok(Grid1D { points, n, spacing, qubits: n.trailing_zeros(), unit: internal_unit })
}

impl Grid1D {
    pub fn max_abs(&self) -> f64 {
        self.points.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DafKineticSpec {
    pub mass: f64,
    pub sigma: f64,
    pub m_daf: usize,
    pub hbar: f64,
}

impl DafKineticSpec {
    /// Defaults validated against the analytic Gaussian second derivative:
    /// M = 20 and σ = 1.5 Δx.
    pub fn for_grid(grid: &Grid1D, mass: f64) -> Self {
        DafKineticSpec { mass, sigma: 1.5 * grid.spacing, m_daf: 20, hbar: 1.0 }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.m_daf < 2 || !self.m_daf.is_multiple_of(2) {
            return Err(GridError::BadDaf(format!("m_daf must be even and >= 2, got {}", self.m_daf)));
        }
        if !(self.sigma > 0.0) {
            return Err(GridError::BadDaf(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.mass > 0.0) {
            return Err(GridError::BadDaf(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar > 0.0) {
            return Err(GridError::BadDaf(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }
}

/// Physicists' Hermite polynomials H_0..=H_max at z.
fn hermite_all(z: f64, max: usize) -> Vec<f64> {
    let mut h = vec![0.0; max + 1];
    h[0] = 1.0;
    if max >= 1 {
        h[1] = 2.0 * z;
    }
    for k in 1..max {
        h[k + 1] = 2.0 * z * h[k] - 2.0 * k as f64 * h[k - 1];
    }
    h
}

/// DAF kernel value at separation `d`, including the quadrature weight Δx.
fn daf_kernel(d: f64, dx: f64, spec: &DafKineticSpec) -> f64 {
    let s = spec.sigma;
    let z = d / (std::f64::consts::SQRT_2 * s);
    let h = hermite_all(z, spec.m_daf + 2);
    let mut sum = 0.0;
    let mut coef = 1.0;
    for k in 0..=spec.m_daf / 2 {
        if k > 0 {
            coef *= -0.25 / k as f64;
        }
        sum += coef * h[2 * k + 2];
    }
    let pref = -spec.hbar * spec.hbar
        / (4.0 * spec.mass * s.powi(3) * (2.0 * std::f64::consts::PI).sqrt());
    dx * pref * (-d * d / (2.0 * s * s)).exp() * sum
}

/// Banded Toeplitz DAF representation of −(ħ²/2m) d²/dx².
pub fn daf_kinetic(grid: &Grid1D, spec: &DafKineticSpec) -> Result<RMat, GridError> {
    spec.validate()?;
    let n = grid.n;
    let band: Vec<f64> = (0..n).map(|k| daf_kernel(k as f64 * grid.spacing, grid.spacing, spec)).collect();
    Ok(RMat::from_fn(n, n, |i, l| band[i.abs_diff(l)]))
}

/// V(x1, x2) sampled on the product grid, values in hartree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSurface {
    pub values: RMat,
    pub symmetric: bool,
}

impl PotentialSurface {
    pub fn n1(&self) -> usize {
        self.values.nrows()
    }

    pub fn n2(&self) -> usize {
        self.values.ncols()
    }

    /// Largest |V[i][j] − V[n1−1−i][n2−1−j]|.
    pub fn inversion_deviation(&self) -> f64 {
        let (n1, n2) = self.values.shape();
        let mut dev: f64 = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                dev = dev.max((self.values[(i, j)] - self.values[(n1 - 1 - i, n2 - 1 - j)]).abs());
            }
        }
        dev
    }
}

/// Parameters of the synthetic gated double-well surface
///
/// V = b·(1 + g·(x2/x2max)²)·((x1/x0)² − 1)² + ½k·x2² + q·x2⁴ + c·x1·x2
///
/// The barrier along the proton coordinate x1 is modulated by the torsion x2
/// (gating); the bilinear term is off by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPesParams {
    /// Barrier height between the two wells, kcal/mol.
    pub barrier_kcal: f64,
    /// Position of the well minima, ångström.
    pub well_offset_angstrom: f64,
    /// Relative barrier increase at the torsional grid edge.
    pub gating: f64,
    /// Harmonic torsional stiffness, kcal/mol/rad².
    pub torsion_kcal_rad2: f64,
    /// Quartic torsional term, kcal/mol/rad⁴.
    pub torsion_quartic_kcal_rad4: f64,
    /// Bilinear x1·x2 coupling, kcal/mol/(Å·rad).
    pub bilinear_kcal: f64,
}

/// Effective mass of the torsional coordinate in electron masses.
pub const DEFAULT_TORSION_MASS: f64 = 3500.0;

impl Default for SyntheticPesParams {
    fn default() -> Self {
        SyntheticPesParams {
            barrier_kcal: 3.0,
            well_offset_angstrom: 0.4,
            gating: 0.1,
            torsion_kcal_rad2: 0.0,
            torsion_quartic_kcal_rad4: 50.0,
            bilinear_kcal: 0.0,
        }
    }
}

pub fn synthetic_pes(
    p: &SyntheticPesParams,
    g1: &Grid1D,
    g2: &Grid1D,
) -> Result<PotentialSurface, GridError> {
    if !(p.well_offset_angstrom > 0.0) {
        return Err(GridError::Parse("well offset must be positive".into()));
    }
    let b = units::kcal_to_hartree(p.barrier_kcal);
    let x0 = units::angstrom_to_bohr(p.well_offset_angstrom);
    let x2max = g2.max_abs();
    let kt = units::kcal_to_hartree(p.torsion_kcal_rad2);
    let q = units::kcal_to_hartree(p.torsion_quartic_kcal_rad4);
    let cpl = units::kcal_to_hartree(p.bilinear_kcal) / units::angstrom_to_bohr(1.0);
    let mut values = RMat::zeros(g1.n, g2.n);
    for (i, &x1) in g1.points.iter().enumerate() {
        for (j, &x2) in g2.points.iter().enumerate() {
            let r = x2 / x2max;
            let w = (x1 / x0).powi(2) - 1.0;
            let v = b * (1.0 + p.gating * r * r) * w * w
                + 0.5 * kt * x2 * x2
                + q * x2.powi(4)
                + cpl * x1 * x2;
            if !v.is_finite() {
                return Err(GridError::NonFinite(i, j));
            }
            values[(i, j)] = v;
        }
    }
    Ok(PotentialSurface { values, symmetric: true })
}

/// Parse the `pes v1 <n1> <n2> <unit> <symmetric:0|1>` text format.
pub fn parse_pes(text: &str) -> Result<PotentialSurface, GridError> {
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| tokens.next().ok_or_else(|| GridError::Parse(format!("missing {what}")));
    if next("magic")? != "pes" {
        return Err(GridError::Parse("header must start with 'pes'".into()));
    }
    let ver = next("version")?;
    if ver != "v1" {
        return Err(GridError::Parse(format!("unsupported version {ver}")));
    }
    let n1: usize = next("n1")?.parse().map_err(|e| GridError::Parse(format!("n1: {e}")))?;
    let n2: usize = next("n2")?.parse().map_err(|e| GridError::Parse(format!("n2: {e}")))?;
    let unit_tok = next("unit")?;
    let unit = EnergyUnit::parse(unit_tok).ok_or_else(|| GridError::Parse(format!("unknown unit {unit_tok}")))?;
    let sym = match next("symmetry flag")? {
        "0" => false,
        "1" => true,
        other => return Err(GridError::Parse(format!("symmetry flag must be 0 or 1, got {other}"))),
    };
    for n in [n1, n2] {
        if n < 2 || !n.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n));
        }
    }
    let scale = unit.to_hartree();
    let mut vals = Vec::with_capacity(n1 * n2);
    for tok in tokens.by_ref() {
        let v: f64 = tok.parse().map_err(|e| GridError::Parse(format!("value {tok:?}: {e}")))?;
        vals.push(v * scale);
    }
    if vals.len() != n1 * n2 {
        return Err(GridError::Parse(format!("expected {} values, found {}", n1 * n2, vals.len())));
    }
    let values = RMat::from_row_slice(n1, n2, &vals);
    // nalgebra storage is column-major
    if let Some((i, j)) = values.iter().position(|v| !v.is_finite()).map(|k| (k % n1, k / n1)) {
        return Err(GridError::NonFinite(i, j));
    }
    let surf = PotentialSurface { values, symmetric: sym };
    if sym {
        let dev = surf.inversion_deviation();
        // threshold applies in the file's own unit
        if dev / scale > 1e-9 {
            return Err(GridError::NotSymmetric(dev / scale));
        }
    }
    Ok(surf)
}

pub fn load_pes(path: &Path) -> Result<PotentialSurface, GridError> {
    let text = std::fs::read_to_string(path)?;
    parse_pes(&text)
}

/// Serialize in the PES text format, values in `unit`.
pub fn format_pes(surf: &PotentialSurface, unit: EnergyUnit) -> String {
    let (n1, n2) = surf.values.shape();
    let mut out = format!("pes v1 {n1} {n2} {} {}\n", unit.label(), u8::from(surf.symmetric));
    let scale = unit.to_hartree();
    for i in 0..n1 {
        let row: Vec<String> = (0..n2).map(|j| format!("{:.17e}", surf.values[(i, j)] / scale)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearHamiltonian2D {
    pub matrix: RMat,
    pub n1: usize,
    pub n2: usize,
}

/// H = K1⊗I + I⊗K2 + diag(V), with the x1 index running slowest.
pub fn assemble_h2d(k1: &RMat, k2: &RMat, v: &PotentialSurface) -> Result<NuclearHamiltonian2D, GridError> {
    let (n1, n2) = (k1.nrows(), k2.nrows());
    if k1.ncols() != n1 || k2.ncols() != n2 || v.n1() != n1 || v.n2() != n2 {
        return Err(GridError::Dimension(format!(
            "K1 {:?}, K2 {:?}, V {:?}",
            k1.shape(),
            k2.shape(),
            v.values.shape()
        )));
    }
    let mut h = kron(k1, &RMat::identity(n2, n2)) + kron(&RMat::identity(n1, n1), k2);
    for i in 0..n1 {
        for j in 0..n2 {
            h[(i * n2 + j, i * n2 + j)] += v.values[(i, j)];
        }
    }
    // enforce exact symmetry against rounding in the Kronecker sums
    let h = (&h + h.transpose()) * 0.5;
    Ok(NuclearHamiltonian2D { matrix: h, n1, n2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLadderExact {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: RMat,
}

impl EnergyLadderExact {
    /// Eigenvalues shifted so that the ground level is zero.
    pub fn relative(&self) -> Vec<f64> {
        let e0 = self.eigenvalues[0];
        self.eigenvalues.iter().map(|e| e - e0).collect()
    }
}

pub fn symmetry_deviation(h: &RMat) -> f64 {
    (h - h.transpose()).iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn exact_eigensolve(h: &RMat) -> Result<EnergyLadderExact, GridError> {
    if h.nrows() != h.ncols() {
        return Err(GridError::Dimension(format!("non-square {:?}", h.shape())));
    }
    let scale = h.iter().fold(1e-300_f64, |m, x| m.max(x.abs()));
    let dev = symmetry_deviation(h);
    if dev > 1e-12 * scale {
        return Err(GridError::NotHermitian(dev));
    }
    let (eigenvalues, eigenvectors) = sym_eigen(h);
    Ok(EnergyLadderExact { eigenvalues, eigenvectors })
}

/// Uniform time axis of one simulation row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSchedule {
    pub dt_fs: f64,
    pub total_fs: f64,
    pub n_steps: usize,
}

impl SimulationSchedule {
    pub fn new(dt_fs: f64, total_fs: f64) -> Self {
        let n_steps = (total_fs / dt_fs).round() as usize;
        SimulationSchedule { dt_fs, total_fs, n_steps }
    }

    /// Bin width 1/(2T) in THz.
    pub fn d_omega_thz(&self) -> f64 {
        1.0 / (2.0 * self.total_fs * 1e-3)
    }

    /// Nyquist limit 1/(2Δt) in THz.
    pub fn omega_max_thz(&self) -> f64 {
        1.0 / (2.0 * self.dt_fs * 1e-3)
    }

    /// Sampling rate 1/Δt in THz.
    pub fn sample_rate_thz(&self) -> f64 {
        1.0 / (self.dt_fs * 1e-3)
    }

    pub fn time_fs(&self, k: usize) -> f64 {
        k as f64 * self.dt_fs
    }

    pub fn time_au(&self, k: usize) -> f64 {
        units::fs_to_au(self.time_fs(k))
    }
}

/// Exact propagation through the spectral expansion
/// ψ(t) = Σ_i φ_i e^{−iE_i t/ħ} ⟨φ_i|ψ0⟩, returning grid densities.
pub fn classical_propagate(
    ladder: &EnergyLadderExact,
    psi0: &CVec,
    schedule: &SimulationSchedule,
) -> Result<TimeTrace, GridError> {
    let n = ladder.eigenvalues.len();
    if psi0.len() != n {
        return Err(GridError::Dimension(format!("state {} vs H {}", psi0.len(), n)));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(GridError::Unnormalized(norm));
    }
    let v = &ladder.eigenvectors;
    let coeffs: Vec<C64> = (0..n)
        .map(|k| (0..n).map(|x| psi0[x] * v[(x, k)]).sum())
        .collect();
    let mut slices = Vec::with_capacity(schedule.n_steps + 1);
    for step in 0..=schedule.n_steps {
        let t = schedule.time_au(step);
        let phased: Vec<C64> = coeffs
            .iter()
            .zip(&ladder.eigenvalues)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        let rho: Vec<f64> = (0..n)
            .map(|x| {
                let amp: C64 = (0..n).map(|k| phased[k] * v[(x, k)]).sum();
                amp.norm_sqr()
            })
            .collect();
        slices.push(rho);
    }
    Ok(TimeTrace::new(schedule.dt_fs, slices))
}

/// Classical propagation from a δ at grid index `g`.
pub fn classical_delta_trace(h: &RMat, g: usize, schedule: &SimulationSchedule) -> Result<TimeTrace, GridError> {
    let ladder = exact_eigensolve(h)?;
    let mut psi0 = CVec::zeros(h.nrows());
    psi0[g] = C64::new(1.0, 0.0);
    classical_propagate(&ladder, &psi0, schedule)
}

pub fn diag_from(values: &[f64]) -> RMat {
    RMat::from_diagonal(&DVector::from_row_slice(values))
}
