// SPDX-License-Identifier: Apache-2.0
//! Schmidt factorization of 2-D wavepackets and of the potential half-step
//! propagator into 1-D channels, effective 1-D Hamiltonians, and the
//! channel-wise split-operator step.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::PotentialSurface;
use crate::linalg::{CMat, RMat, C64};
use crate::units;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("state is not normalized (Frobenius norm {0})")]
    Unnormalized(f64),
    #[error("channel factor vanishes at grid point {0} (|V| = {1:.3e})")]
    ZeroEntry(usize, f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
}

/// ψ(x1, x2) = Σ_α λ_α φ¹_α(x1) φ²_α(x2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtWavepacket {
    pub left: CMat,
    pub right: CMat,
    pub weights: Vec<f64>,
}

impl SchmidtWavepacket {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.left.nrows(), self.right.nrows());
        for (a, &w) in self.weights.iter().enumerate() {
            let l = self.left.column(a);
            let r = self.right.column(a);
            out += (l * r.transpose()) * C64::new(w, 0.0);
        }
        out
    }
}

/// Singular triplets sorted by descending singular value; the right vectors
/// are returned conjugated so that m = Σ s_k u_k v_kᵀ.
fn sorted_svd(m: &CMat) -> (Vec<f64>, CMat, CMat) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&j| svd.singular_values[j]).collect();
    let left = CMat::from_fn(m.nrows(), k, |i, c| u[(i, order[c])]);
    let right = CMat::from_fn(m.ncols(), k, |i, c| vt[(order[c], i)]);
    (s, left, right)
}

/// Smallest rank whose discarded weight satisfies sqrt(Σ_{k≥r} s_k²) ≤ tol.
fn truncation_rank(s: &[f64], tol: f64) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    r
}

/// Rotate the phase of column `k` of `a` so its first significant entry is
/// real-positive, applying the conjugate phase to column `k` of `b`.
fn fix_phase(a: &mut CMat, b: &mut CMat, k: usize) {
    let scale = a.column(k).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return;
    }
    if let Some(z) = a.column(k).iter().find(|z| z.norm() > 1e-12 * scale).copied() {
        let ph = z.conj() / z.norm();
        a.column_mut(k).scale_mut(1.0);
        for i in 0..a.nrows() {
            a[(i, k)] *= ph;
        }
        for i in 0..b.nrows() {
            b[(i, k)] /= ph;
        }
    }
}

pub fn schmidt_decompose(psi: &CMat, tol: f64) -> Result<SchmidtWavepacket, TensorError> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(TensorError::Unnormalized(norm));
    }
    let (s, mut left, mut right) = sorted_svd(psi);
    let r = truncation_rank(&s, tol);
    for k in 0..r {
        fix_phase(&mut left, &mut right, k);
    }
    Ok(SchmidtWavepacket {
        left: left.columns(0, r).into_owned(),
        right: right.columns(0, r).into_owned(),
        weights: s[..r].to_vec(),
    })
}

/// One channel of exp(−iVΔt/2ħ) = Σ_β 𝒱¹_β ⊗ 𝒱²_β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub singular_value: f64,
    /// Parity under grid reversal (+1, −1), or 0 if the surface is not symmetric.
    pub parity: i8,
    pub factor1: Vec<C64>,
    pub factor2: Vec<C64>,
    /// (log𝒜, V_eff) per dimension; `None` when the factor has a node.
    pub extracted1: Option<(Vec<f64>, Vec<f64>)>,
    pub extracted2: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialChannelSet {
    pub dt_fs: f64,
    pub tol: f64,
    pub channels: Vec<Channel>,
    pub singular_values: Vec<f64>,
    pub reconstruction_error: f64,
}

impl PotentialChannelSet {
    pub fn rank(&self) -> usize {
        self.channels.len()
    }

    pub fn reconstruct(&self) -> CMat {
        let n1 = self.channels[0].factor1.len();
        let n2 = self.channels[0].factor2.len();
        let mut out = CMat::zeros(n1, n2);
        for ch in &self.channels {
            for i in 0..n1 {
                for j in 0..n2 {
                    out[(i, j)] += ch.factor1[i] * ch.factor2[j];
                }
            }
        }
        out
    }

    /// Max |log𝒜| over channels whose factors have unit modulus everywhere
    /// (within 1e-10), and the max |log𝒜| over all extracted channels.
    pub fn amplitude_log_deviation(&self) -> (f64, f64) {
        let mut unit = 0.0_f64;
        let mut all = 0.0_f64;
        for ch in &self.channels {
            for (f, ex) in [(&ch.factor1, &ch.extracted1), (&ch.factor2, &ch.extracted2)] {
                if let Some((loga, _)) = ex {
                    let dev = loga.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                    all = all.max(dev);
                    if f.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-10) {
                        unit = unit.max(dev);
                    }
                }
            }
        }
        (unit, all)
    }

    /// Effective potentials of dimension `j` (1 or 2) for every extractable channel.
    pub fn potentials(&self, j: u8) -> Vec<(usize, &Vec<f64>)> {
        self.channels
            .iter()
            .enumerate()
            .filter_map(|(b, ch)| {
                let ex = if j == 1 { &ch.extracted1 } else { &ch.extracted2 };
                ex.as_ref().map(|(_, v)| (b, v))
            })
            .collect()
    }
}

/// Elementwise exp(−iV dt/2ħ) with dt in atomic units.
pub fn half_step_propagator(v: &RMat, dt_au: f64) -> CMat {
    v.map(|x| C64::from_polar(1.0, -x * dt_au / 2.0))
}

fn symmetrize_column(m: &mut CMat, k: usize, parity: f64) {
    let n = m.nrows();
    for i in 0..n / 2 {
        let a = m[(i, k)];
        let b = m[(n - 1 - i, k)];
        let avg = (a + b * parity) * 0.5;
        m[(i, k)] = avg;
        m[(n - 1 - i, k)] = avg * parity;
    }
    let nrm = m.column(k).norm();
    if nrm > 0.0 {
        for i in 0..n {
            m[(i, k)] /= nrm;
        }
    }
}

pub fn factor_potential_propagator(
    surface: &PotentialSurface,
    dt_fs: f64,
    tol: f64,
) -> Result<PotentialChannelSet, TensorError> {
    if !(dt_fs > 0.0) {
        return Err(TensorError::BadStep(dt_fs));
    }
    let dt_au = units::fs_to_au(dt_fs);
    let target = half_step_propagator(&surface.values, dt_au);
    let (s, mut left, mut right) = sorted_svd(&target);
    let r = truncation_rank(&s, tol);
    let mut channels = Vec::with_capacity(r);
    for k in 0..r {
        let mut parity = 0i8;
        if surface.symmetric {
            let n = left.nrows();
            let mirror: C64 = (0..n).map(|i| left[(i, k)].conj() * left[(n - 1 - i, k)]).sum();
            let p = if mirror.re >= 0.0 { 1.0 } else { -1.0 };
            symmetrize_column(&mut left, k, p);
            symmetrize_column(&mut right, k, p);
            // keep the triplet consistent: right = conj(M† u)/s after projection
            parity = p as i8;
        }
        fix_phase(&mut left, &mut right, k);
        let root = s[k].sqrt();
        let factor1: Vec<C64> = left.column(k).iter().map(|z| z * root).collect();
        let factor2: Vec<C64> = right.column(k).iter().map(|z| z * root).collect();
        let extracted1 = extract_effective_potential(&factor1, dt_fs).ok();
        let extracted2 = extract_effective_potential(&factor2, dt_fs).ok();
        channels.push(Channel { singular_value: s[k], parity, factor1, factor2, extracted1, extracted2 });
    }
    let mut set = PotentialChannelSet {
        dt_fs,
        tol,
        channels,
        singular_values: s,
        reconstruction_error: 0.0,
    };
    set.reconstruction_error = (set.reconstruct() - target).norm();
    Ok(set)
}

/// Sequential 2π unwrap along the grid.
pub fn unwrap_phase(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let tau = std::f64::consts::TAU;
    for (i, &p) in raw.iter().enumerate() {
        if i == 0 {
            out.push(p);
            continue;
        }
        let prev = out[i - 1];
        let mut step = p - raw[i - 1];
        step -= tau * (step / tau).round();
        out.push(prev + step);
    }
    out
}

/// (log𝒜, V_eff) with log𝒜 = Re log𝒱 and V_eff = −(2ħ/Δt)·unwrap(Im log𝒱).
pub fn extract_effective_potential(factor: &[C64], dt_fs: f64) -> Result<(Vec<f64>, Vec<f64>), TensorError> {
    if !(dt_fs > 0.0) {
        return Err(TensorError::BadStep(dt_fs));
    }
    if let Some((i, z)) = factor.iter().enumerate().find(|(_, z)| z.norm() <= 1e-14) {
        return Err(TensorError::ZeroEntry(i, z.norm()));
    }
    let dt_au = units::fs_to_au(dt_fs);
    let log_a: Vec<f64> = factor.iter().map(|z| z.norm().ln()).collect();
    let phases: Vec<f64> = factor.iter().map(|z| z.arg()).collect();
    let v = unwrap_phase(&phases).into_iter().map(|p| -2.0 * p / dt_au).collect();
    Ok((log_a, v))
}

/// H^[j]_{γ;β} = K^[j] + ½(V_γ + V_β).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub dimension: u8,
    pub gamma: usize,
    pub beta: usize,
    pub matrix: RMat,
}

pub fn build_effective_hamiltonian(
    k: &RMat,
    v_gamma: &[f64],
    v_beta: &[f64],
) -> Result<RMat, TensorError> {
    let n = k.nrows();
    if v_gamma.len() != n || v_beta.len() != n || k.ncols() != n {
        return Err(TensorError::Dimension(format!(
            "K {:?}, V_gamma {}, V_beta {}",
            k.shape(),
            v_gamma.len(),
            v_beta.len()
        )));
    }
    let mut h = k.clone();
    for i in 0..n {
        h[(i, i)] += 0.5 * (v_gamma[i] + v_beta[i]);
    }
    Ok(h)
}

/// Every (γ, β) pair of extractable channels for dimension `j`.
pub fn effective_family(k: &RMat, set: &PotentialChannelSet, j: u8) -> Result<Vec<EffectiveHamiltonian>, TensorError> {
    let pots = set.potentials(j);
    let mut out = Vec::with_capacity(pots.len() * pots.len());
    for &(g, vg) in &pots {
        for &(b, vb) in &pots {
            let matrix = build_effective_hamiltonian(k, vg, vb)?;
            out.push(EffectiveHamiltonian { dimension: j, gamma: g, beta: b, matrix });
        }
    }
    Ok(out)
}

/// One symmetric split step on the dense grid state:
/// e^{−iVΔt/2} e^{−iKΔt} e^{−iVΔt/2}.
pub fn dense_trotter_step(psi: &CMat, half: &CMat, kin1: &CMat, kin2: &CMat) -> CMat {
    let a = psi.component_mul(half);
    let b = kin1 * a * kin2.transpose();
    b.component_mul(half)
}

/// One split step carried out channel by channel: every (α, β, γ) term is a
/// product of independent 1-D propagations, then the sum is renormalized and
/// re-factored at `tol`.
pub fn propagate_mps_step(
    wp: &SchmidtWavepacket,
    channels: &PotentialChannelSet,
    kin1: &CMat,
    kin2: &CMat,
    tol: f64,
) -> Result<SchmidtWavepacket, TensorError> {
    let n1 = wp.left.nrows();
    let n2 = wp.right.nrows();
    if kin1.nrows() != n1
        || kin2.nrows() != n2
        || channels.channels.iter().any(|c| c.factor1.len() != n1 || c.factor2.len() != n2)
    {
        return Err(TensorError::Dimension("channel set, kinetic propagators and wavepacket disagree".into()));
    }
    let mut dense = CMat::zeros(n1, n2);
    for (a, &lam) in wp.weights.iter().enumerate() {
        let phi1 = wp.left.column(a);
        let phi2 = wp.right.column(a);
        for beta in &channels.channels {
            let s1 = kin1 * CMat::from_fn(n1, 1, |i, _| beta.factor1[i] * phi1[i]);
            let s2 = kin2 * CMat::from_fn(n2, 1, |i, _| beta.factor2[i] * phi2[i]);
            for gamma in &channels.channels {
                let w1 = CMat::from_fn(n1, 1, |i, _| gamma.factor1[i] * s1[(i, 0)]);
                let w2 = CMat::from_fn(n2, 1, |i, _| gamma.factor2[i] * s2[(i, 0)]);
                dense += (w1 * w2.transpose()) * C64::new(lam, 0.0);
            }
        }
    }
    let nrm = dense.norm();
    dense /= C64::new(nrm, 0.0);
    schmidt_decompose(&dense, tol)
}

/// |⟨a|b⟩| for dense grid states.
pub fn overlap(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}
