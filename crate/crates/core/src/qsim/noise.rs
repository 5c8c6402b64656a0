// SPDX-License-Identifier: Apache-2.0
//! Density-matrix execution with a two-qubit depolarizing channel after
//! every CNOT.

use serde::{Deserialize, Serialize};

use super::statevector::bit_of;
use super::QsimError;
use crate::compiler::{Circuit, Gate};
use crate::linalg::{CMat, C64};

pub const MAX_DENSITY_WIDTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability per CNOT.
    pub p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Result<Self, QsimError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QsimError::BadNoise(p));
        }
        Ok(NoiseModel { p })
    }
}

fn apply_left_right(rho: &mut CMat, width: usize, g: &Gate) {
    let dim = rho.nrows();
    // ρ → G ρ G†: apply G to every column, then conj(G) to every row
    for c in 0..dim {
        let mut col: Vec<C64> = rho.column(c).iter().copied().collect();
        super::statevector::apply_gate(&mut col, width, g);
        for (r, v) in col.into_iter().enumerate() {
            rho[(r, c)] = v;
        }
    }
    let conj = conjugate_gate(g);
    for r in 0..dim {
        let mut row: Vec<C64> = rho.row(r).iter().copied().collect();
        apply_conj(&mut row, width, g, &conj);
        for (c, v) in row.into_iter().enumerate() {
            rho[(r, c)] = v;
        }
    }
}

fn conjugate_gate(g: &Gate) -> Option<[[C64; 2]; 2]> {
    g.matrix_1q().map(|m| [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]])
}

fn apply_conj(row: &mut [C64], width: usize, g: &Gate, conj: &Option<[[C64; 2]; 2]>) {
    match (g, conj) {
        (Gate::Cnot { .. }, _) => super::statevector::apply_gate(row, width, g),
        (_, Some(m)) => {
            let q = g.qubits()[0];
            let bit = bit_of(q, width);
            for i in 0..row.len() {
                if i & bit == 0 {
                    let j = i | bit;
                    let (a, b) = (row[i], row[j]);
                    row[i] = m[0][0] * a + m[0][1] * b;
                    row[j] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
        _ => unreachable!(),
    }
}

/// (1 − p)ρ + p·(Tr_{ab} ρ) ⊗ I/4, identical to averaging over all 16
/// two-qubit Paulis.
fn depolarize_pair(rho: &mut CMat, width: usize, a: usize, b: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    let dim = rho.nrows();
    let mask = bit_of(a, width) | bit_of(b, width);
    let mut reduced = CMat::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            if (r & mask) != (c & mask) {
                continue;
            }
            // sum over the pair's four diagonal configurations
            let rb = r & !mask;
            let cb = c & !mask;
            let mut s = C64::new(0.0, 0.0);
            for pat in [0, bit_of(a, width), bit_of(b, width), mask] {
                s += rho[(rb | pat, cb | pat)];
            }
            reduced[(r, c)] = s * 0.25;
        }
    }
    *rho = &*rho * C64::new(1.0 - p, 0.0) + reduced * C64::new(p, 0.0);
}

/// Run `circuit` from `rho0` (or |0…0⟩⟨0…0|) and return the final density matrix.
pub fn evolve_density(circuit: &Circuit, model: &NoiseModel, rho0: Option<CMat>) -> Result<CMat, QsimError> {
    let w = circuit.width;
    if w > MAX_DENSITY_WIDTH {
        return Err(QsimError::TooWide { width: w, limit: MAX_DENSITY_WIDTH });
    }
    let dim = 1usize << w;
    let mut rho = rho0.unwrap_or_else(|| {
        let mut r = CMat::zeros(dim, dim);
        r[(0, 0)] = C64::new(1.0, 0.0);
        r
    });
    for g in &circuit.gates {
        apply_left_right(&mut rho, w, g);
        if let Gate::Cnot { control, target } = *g {
            depolarize_pair(&mut rho, w, control, target, model.p);
        }
    }
    Ok(rho)
}

/// Measurement probabilities of the noisy execution.
pub fn apply_noise(circuit: &Circuit, model: &NoiseModel) -> Result<Vec<f64>, QsimError> {
    let rho = evolve_density(circuit, model, None)?;
    Ok((0..rho.nrows()).map(|i| rho[(i, i)].re.max(0.0)).collect())
}
