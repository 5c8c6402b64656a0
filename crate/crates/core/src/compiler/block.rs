// SPDX-License-Identifier: Apache-2.0
//! diag(U₀, U₁) = (I⊗U)·diag(D, D†)·(I⊗V), with U and D² taken from the
//! eigendecomposition U₀U₁† = U D² U†.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{check_unitary, kak_gates, diagonal_gates, Circuit, CompileError};
use crate::linalg::{CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockUnitaryFactorization {
    pub u: CMat,
    pub d: Vec<C64>,
    pub v: CMat,
}

impl BlockUnitaryFactorization {
    pub fn d_matrix(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(self.d.clone()))
    }

    pub fn reconstruct(&self) -> (CMat, CMat) {
        let dm = self.d_matrix();
        (&self.u * &dm * &self.v, &self.u * dm.adjoint() * &self.v)
    }
}

// merging eigenvalues this close costs at most this much reconstruction error
const CLUSTER_GAP: f64 = 1e-11;

/// Make the first significant component of each column real-positive.
fn fix_column_phase(m: &mut CMat, k: usize) {
    let scale = m.column(k).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if let Some(z) = m.column(k).iter().find(|z| z.norm() > 1e-8 * scale).copied() {
        let ph = z.conj() / z.norm();
        for i in 0..m.nrows() {
            m[(i, k)] *= ph;
        }
    }
}

/// Orthonormal basis of span(cols) chosen by pivoted Gram–Schmidt on the
/// projected unit vectors, so the result does not depend on how the
/// eigensolver happened to rotate a degenerate subspace.
fn canonical_subspace_basis(cols: &[CVec]) -> Vec<CVec> {
    let n = cols[0].len();
    let mut proj = CMat::zeros(n, n);
    for c in cols {
        proj += c * c.adjoint();
    }
    let mut chosen: Vec<CVec> = Vec::new();
    let mut used = vec![false; n];
    while chosen.len() < cols.len() {
        let mut best: Option<(usize, CVec, f64)> = None;
        for j in (0..n).filter(|&j| !used[j]) {
            let mut v = proj.column(j).clone_owned();
            for q in &chosen {
                let ov = q.dotc(&v);
                v -= q * ov;
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|b| nv > b.2 + 1e-12) {
                best = Some((j, v, nv));
            }
        }
        let (j, v, nv) = best.expect("subspace rank matches cluster size");
        used[j] = true;
        chosen.push(v / C64::new(nv, 0.0));
    }
    chosen
}

/// Eigenvectors of a unitary matrix. W is normal, so its Hermitian and
/// anti-Hermitian parts commute and a generic real mix of the two has the
/// same eigenvectors. A Hermitian solver always converges, which the general
/// complex Schur iteration does not on near-identity input.
fn unitary_eigenvectors(w: &CMat) -> Result<CMat, CompileError> {
    let herm = (w + w.adjoint()) * C64::new(0.5, 0.0);
    let anti = (w - w.adjoint()) * C64::new(0.0, -0.5);
    let mut worst = 0.0_f64;
    for mix in [0.577_350_269, 1.324_717_957, -0.414_213_562, std::f64::consts::E] {
        let a = &herm + &anti * C64::new(mix, 0.0);
        let q = SymmetricEigen::new(a).eigenvectors;
        let t = q.adjoint() * w * &q;
        let off = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(0.0_f64, |m, (i, j)| m.max(t[(i, j)].norm()));
        if off < 1e-10 {
            return Ok(q);
        }
        worst = off;
    }
    Err(CompileError::Reconstruction(worst))
}

pub fn svd_block_factor(u0: &CMat, u1: &CMat) -> Result<BlockUnitaryFactorization, CompileError> {
    check_unitary(u0, 4, 1e-10)?;
    check_unitary(u1, 4, 1e-10)?;
    let w = u0 * u1.adjoint();
    let q = unitary_eigenvectors(&w)?;
    let n = 4;
    let lam: Vec<C64> = (0..n).map(|k| q.column(k).dotc(&(&w * q.column(k)))).collect();

    // order eigenvalues by angle, starting after the widest circular gap so
    // that a cluster never straddles the ±π cut
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| lam[a].arg().total_cmp(&lam[b].arg()));
    let angles: Vec<f64> = idx.iter().map(|&k| lam[k].arg()).collect();
    let mut start = 0;
    let mut widest = -1.0;
    for s in 0..n {
        let next = (s + 1) % n;
        let mut gap = angles[next] - angles[s];
        if gap <= 0.0 {
            gap += std::f64::consts::TAU;
        }
        if gap > widest + 1e-12 {
            widest = gap;
            start = next;
        }
    }
    let order: Vec<usize> = (0..n).map(|s| idx[(start + s) % n]).collect();

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match clusters.last_mut() {
            Some(cl) if (lam[*cl.last().unwrap()] - lam[k]).norm() < CLUSTER_GAP => cl.push(k),
            _ => clusters.push(vec![k]),
        }
    }

    let mut u = CMat::zeros(n, n);
    let mut col = 0;
    for cl in &clusters {
        let vecs: Vec<CVec> = cl.iter().map(|&k| q.column(k).clone_owned()).collect();
        let basis = if vecs.len() > 1 { canonical_subspace_basis(&vecs) } else { vecs };
        for v in basis {
            u.set_column(col, &v);
            fix_column_phase(&mut u, col);
            col += 1;
        }
    }
    // D_k = principal square root of the Rayleigh quotient u_k† W u_k
    let d: Vec<C64> = (0..n)
        .map(|k| {
            let uk = u.column(k);
            let r = uk.dotc(&(&w * uk));
            C64::from_polar(1.0, r.arg() / 2.0)
        })
        .collect();
    let dinv = CMat::from_diagonal(&CVec::from_iterator(n, d.iter().map(|z| z.conj())));
    let v = dinv * u.adjoint() * u0;
    let fac = BlockUnitaryFactorization { u, d, v };
    let (r0, r1) = fac.reconstruct();
    let err = (r0 - u0).norm().max((r1 - u1).norm());
    if err > 1e-9 {
        return Err(CompileError::Reconstruction(err));
    }
    Ok(fac)
}

/// Three-qubit circuit for diag(U₀, U₁); qubit 0 selects the block and is
/// left untouched by the two KAK layers.
pub fn compile_block_diagonal(u0: &CMat, u1: &CMat) -> Result<Circuit, CompileError> {
    let fac = svd_block_factor(u0, u1)?;
    let mut c = Circuit::new(3);
    c.extend(kak_gates(&fac.v, 1, 2)?);
    c.extend(diagonal_gates(&fac.d, 0, 1, 2)?);
    c.extend(kak_gates(&fac.u, 1, 2)?);
    let mut target = CMat::zeros(8, 8);
    target.view_mut((0, 0), (4, 4)).copy_from(u0);
    target.view_mut((4, 4), (4, 4)).copy_from(u1);
    c.target_checksum = Some(super::unitary_checksum(&target));
    Ok(c)
}
