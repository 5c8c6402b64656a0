// SPDX-License-Identifier: Apache-2.0
//! diag(D, D†) on three qubits with four CNOTs and four Rz rotations.
//!
//! Writing D = e^{iΦ}, diag(D, D†) = exp(i Z_s ⊗ Φ) where Z_s acts on the
//! block selector. Expanding Φ = c₀ + c₁Z₁ + c₂Z₂ + c₁₂Z₁Z₂ turns the target
//! into a product of commuting parity rotations, visited in Gray-code order
//! so that consecutive parities differ by one CNOT.

use super::{Circuit, CompileError, Gate};
use crate::linalg::C64;

/// Walsh coefficients (c₀, c₁, c₂, c₁₂) of the phase vector, with the
/// first listed qubit as the more significant index bit.
fn walsh(phi: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, &p) in phi.iter().enumerate() {
        let z1 = if k & 2 == 0 { 1.0 } else { -1.0 };
        let z2 = if k & 1 == 0 { 1.0 } else { -1.0 };
        out[0] += p;
        out[1] += p * z1;
        out[2] += p * z2;
        out[3] += p * z1 * z2;
    }
    out.map(|x| x / 4.0)
}

/// Gates for diag(D, D†) with `sel` as the block selector and (`qa`, `qb`)
/// carrying D.
pub fn diagonal_gates(d: &[C64], sel: usize, qa: usize, qb: usize) -> Result<Vec<Gate>, CompileError> {
    if d.len() != 4 {
        return Err(CompileError::Shape { expected: 4, rows: d.len(), cols: 1 });
    }
    for (k, z) in d.iter().enumerate() {
        if (z.norm() - 1.0).abs() > 1e-10 {
            return Err(CompileError::NotUnitModulus(k, z.norm()));
        }
    }
    let phi = [d[0].arg(), d[1].arg(), d[2].arg(), d[3].arg()];
    let [c0, c1, c2, c12] = walsh(&phi);
    // Rz(λ) = exp(−iλZ/2), so each parity term c·Z.. needs λ = −2c
    Ok(vec![
        Gate::Rz { qubit: sel, angle: -2.0 * c0 },
        Gate::Cnot { control: qb, target: sel },
        Gate::Rz { qubit: sel, angle: -2.0 * c2 },
        Gate::Cnot { control: qa, target: sel },
        Gate::Rz { qubit: sel, angle: -2.0 * c12 },
        Gate::Cnot { control: qb, target: sel },
        Gate::Rz { qubit: sel, angle: -2.0 * c1 },
        Gate::Cnot { control: qa, target: sel },
    ])
}

/// Three-qubit circuit for diag(D, D†), qubit 0 selecting the block.
pub fn compile_diagonal(d: &[C64]) -> Result<Circuit, CompileError> {
    let mut c = Circuit::new(3);
    c.extend(diagonal_gates(d, 0, 1, 2)?);
    Ok(c)
}
