// SPDX-License-Identifier: Apache-2.0
//! Product-state preparation and the grid readout map.

use serde::{Deserialize, Serialize};

use super::{Circuit, CompileError, Gate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepBasis {
    /// The target index is a computational basis state (block-local runs).
    Computational,
    /// Givens basis, block selector on qubit 0.
    Transformed,
    /// Givens basis with the lower half reversed; every grid δ is a product state.
    Shuffled,
}

fn flip(c: &mut Circuit, q: usize) {
    c.push(Gate::SqrtX { qubit: q });
    c.push(Gate::SqrtX { qubit: q });
}

fn load_bits(c: &mut Circuit, value: usize, first: usize, nbits: usize) {
    for b in 0..nbits {
        if value >> (nbits - 1 - b) & 1 == 1 {
            flip(c, first + b);
        }
    }
}

/// Single-qubit-only circuit preparing the basis representation of a δ at
/// `grid_index` from |0…0⟩.
pub fn prepare_delta_state(grid_index: usize, basis: PrepBasis, width: usize) -> Result<Circuit, CompileError> {
    let n = 1usize << width;
    if grid_index >= n {
        return Err(CompileError::IndexRange { index: grid_index, width });
    }
    let mut c = Circuit::new(width);
    match basis {
        PrepBasis::Computational => load_bits(&mut c, grid_index, 0, width),
        PrepBasis::Shuffled | PrepBasis::Transformed => {
            if width < 1 {
                return Err(CompileError::Width { expected: 1, got: width });
            }
            let m = n / 2;
            // δ_g = (|upper_k⟩ ± |lower_k'⟩)/√2; in the shuffled ordering k' = k
            let (k, kp, minus) = if grid_index >= m {
                (n - 1 - grid_index, m - 1 - (n - 1 - grid_index), false)
            } else {
                (grid_index, m - 1 - grid_index, true)
            };
            let lower = if basis == PrepBasis::Shuffled { k } else { kp };
            if lower != k {
                return Err(CompileError::Entangled(grid_index));
            }
            if minus {
                flip(&mut c, 0);
            }
            c.push(Gate::H { qubit: 0 });
            load_bits(&mut c, k, 1, width - 1);
        }
    }
    Ok(c)
}

/// Append the block-selector Hadamard that maps shuffled-basis outcomes one
/// to one onto grid points.
pub fn append_grid_basis_map(mut circuit: Circuit) -> Result<Circuit, CompileError> {
    if circuit.width != 3 {
        return Err(CompileError::Width { expected: 3, got: circuit.width });
    }
    circuit.push(Gate::H { qubit: 0 });
    Ok(circuit)
}
