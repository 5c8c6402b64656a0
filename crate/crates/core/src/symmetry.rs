// SPDX-License-Identifier: Apache-2.0
//! Inversion-symmetry blocking of 1-D Hamiltonians and the three bases used
//! for state preparation and readout.
//!
//! Storage is 0-based, so the mirror partner of grid index `i` is `n − 1 − i`.
//! For n = 4 the Givens rows are
//!
//! ```text
//! |0> -> (x0 + x3)/√2    |2> -> (x2 − x1)/√2
//! |1> -> (x1 + x2)/√2    |3> -> (x3 − x0)/√2
//! ```
//!
//! which is the pairing that makes the off-diagonal blocks vanish for a
//! mirror-symmetric potential.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::RMat;

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("matrix size {0} is not even")]
    OddSize(usize),
    #[error("off-diagonal residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    Coupled { residual: f64, threshold: f64 },
    #[error("unsupported basis size {0}")]
    Unsupported(usize),
    #[error("count vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

pub fn mirror(i: usize, n: usize) -> usize {
    n - 1 - i
}

/// +1 on the upper half, −1 on the lower half.
pub fn alpha(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        1.0
    } else {
        -1.0
    }
}

/// Orthogonal G with rows (e_i + α_i e_{n−1−i})/√2.
pub fn givens_matrix(n: usize) -> RMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = RMat::zeros(n, n);
    for i in 0..n {
        g[(i, i)] += r;
        g[(i, mirror(i, n))] += alpha(i, n) * r;
    }
    g
}

/// diag(I, −I)·G: same blocks, but symmetric and therefore an involution.
pub fn givens_involution(n: usize) -> RMat {
    let mut g = givens_matrix(n);
    for i in n / 2..n {
        for j in 0..n {
            g[(i, j)] = -g[(i, j)];
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    pub h_tilde: RMat,
    pub upper: RMat,
    pub lower: RMat,
    pub offdiag_residual: f64,
}

pub fn givens_transform(h: &RMat) -> Result<BlockDecomposition, SymmetryError> {
    let n = h.nrows();
    if !n.is_multiple_of(2) || h.ncols() != n {
        return Err(SymmetryError::OddSize(n));
    }
    let g = givens_matrix(n);
    let h_tilde = &g * h * g.transpose();
    let m = n / 2;
    let upper = h_tilde.view((0, 0), (m, m)).into_owned();
    let lower = h_tilde.view((m, m), (m, m)).into_owned();
    let mut residual: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            residual = residual.max(h_tilde[(i, m + j)].abs()).max(h_tilde[(m + i, j)].abs());
        }
    }
    Ok(BlockDecomposition { h_tilde, upper, lower, offdiag_residual: residual })
}

/// Eigenvalues of the two blocks, refusing to proceed when the blocks are
/// coupled beyond `threshold`.
pub fn block_spectra(dec: &BlockDecomposition, threshold: f64) -> Result<(Vec<f64>, Vec<f64>), SymmetryError> {
    if dec.offdiag_residual > threshold {
        return Err(SymmetryError::Coupled { residual: dec.offdiag_residual, threshold });
    }
    let (u, _) = crate::linalg::sym_eigen(&dec.upper);
    let (l, _) = crate::linalg::sym_eigen(&dec.lower);
    Ok((u, l))
}

/// Reversal permutation P (P = P⁻¹).
pub fn reversal(m: usize) -> RMat {
    RMat::from_fn(m, m, |i, j| if i + j == m - 1 { 1.0 } else { 0.0 })
}

/// The lower block expressed in the shuffled ordering: P·C·P.
pub fn shuffled_lower(lower: &RMat) -> RMat {
    let p = reversal(lower.nrows());
    &p * lower * &p
}

/// Grid coefficients of computational state `k` in the Givens basis.
pub fn givens_state(k: usize, n: usize) -> Vec<f64> {
    givens_matrix(n).row(k).iter().copied().collect()
}

/// Grid coefficients of computational state `k` in the shuffled basis: the
/// lower half of the Givens basis in reverse order.
pub fn shuffled_state(k: usize, n: usize) -> Vec<f64> {
    let m = n / 2;
    let src = if k < m { k } else { m + (n - 1 - k) };
    givens_state(src, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRow {
    pub bitstring: String,
    pub transformed: Vec<f64>,
    pub shuffled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTable {
    pub n: usize,
    pub rows: Vec<BasisRow>,
}

pub fn shuffled_basis_map(n: usize) -> Result<BasisTable, SymmetryError> {
    if n != 4 && n != 8 {
        return Err(SymmetryError::Unsupported(n));
    }
    let width = n.trailing_zeros() as usize;
    let rows = (0..n)
        .map(|k| BasisRow {
            bitstring: format!("{k:0width$b}"),
            transformed: givens_state(k, n),
            shuffled: shuffled_state(k, n),
        })
        .collect();
    Ok(BasisTable { n, rows })
}

fn combination_label(coeffs: &[f64]) -> String {
    let mut parts = Vec::new();
    let mut order: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i].abs() > 1e-12).collect();
    // positive term first, matching the usual (|a> ± |b>)/√2 notation
    order.sort_by(|&a, &b| coeffs[b].total_cmp(&coeffs[a]).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        let sign = if coeffs[i] < 0.0 { "-" } else if pos > 0 { "+" } else { "" };
        parts.push(format!("{sign}|x{i}>"));
    }
    format!("({})/sqrt2", parts.join(""))
}

impl BasisTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("computational,transformed,shuffled\n");
        for r in &self.rows {
            out.push_str(&format!(
                "|{}>,{},{}\n",
                r.bitstring,
                combination_label(&r.transformed),
                combination_label(&r.shuffled)
            ));
        }
        out
    }

    /// Gram matrices of the two columns; both are the identity for a valid table.
    pub fn column_gram(&self) -> (RMat, RMat) {
        let n = self.n;
        let t = RMat::from_fn(n, n, |i, j| self.rows[i].transformed[j]);
        let s = RMat::from_fn(n, n, |i, j| self.rows[i].shuffled[j]);
        (&t * t.transpose(), &s * s.transpose())
    }
}

/// Grid index read out by computational outcome `k` once the block-selector
/// Hadamard has been applied: outcomes in the first half map to the mirrored
/// grid point, the second half to the direct one.
pub fn readout_grid_index(k: usize, n: usize) -> usize {
    let m = n / 2;
    if k < m {
        n - 1 - k
    } else {
        k - m
    }
}

/// Relabel outcome counts (or probabilities) into grid-point order.
pub fn hadamard_grid_readout(counts: &[f64], n: usize) -> Result<Vec<f64>, SymmetryError> {
    if counts.len() != n {
        return Err(SymmetryError::Length { got: counts.len(), expected: n });
    }
    let mut grid = vec![0.0; n];
    for (k, &c) in counts.iter().enumerate() {
        grid[readout_grid_index(k, n)] = c;
    }
    Ok(grid)
}
