// SPDX-License-Identifier: Apache-2.0
//! Two-qubit synthesis through the magic-basis (KAK) decomposition
//!
//! U = e^{iφ} (A1⊗B1) · exp(i(a XX + b YY + c ZZ)) · (A2⊗B2)
//!
//! followed by a fixed three-CNOT realization of the nonlocal core.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::oneq::{ry, rz, single_qubit_gates};
use super::{check_unitary, Circuit, CompileError, Gate};
use crate::linalg::{kron, CMat, C64};

/// Columns are the magic (Bell-like) basis in which local gates become real
/// orthogonal matrices.
pub fn magic_basis() -> CMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let o = C64::new(0.0, 0.0);
    let one = C64::new(r, 0.0);
    let i = C64::new(0.0, r);
    CMat::from_row_slice(4, 4, &[one, i, o, o, o, o, i, one, o, o, i, -one, one, -i, o, o])
}

fn pauli_pairs() -> [CMat; 3] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let x = CMat::from_row_slice(2, 2, &[o, one, one, o]);
    let y = CMat::from_row_slice(2, 2, &[o, -i, i, o]);
    let z = CMat::from_row_slice(2, 2, &[one, o, o, -one]);
    [kron(&x, &x), kron(&y, &y), kron(&z, &z)]
}

/// Split a 4×4 local unitary into A⊗B (up to a phase shared between them).
fn split_product(u: &CMat) -> (CMat, CMat) {
    let mut best = (0, 0);
    let mut best_norm = -1.0;
    for r in 0..2 {
        for c in 0..2 {
            let n = u.view((2 * r, 2 * c), (2, 2)).norm();
            if n > best_norm {
                best_norm = n;
                best = (r, c);
            }
        }
    }
    let blk = u.view((2 * best.0, 2 * best.1), (2, 2)).into_owned();
    let det = blk[(0, 0)] * blk[(1, 1)] - blk[(0, 1)] * blk[(1, 0)];
    let b = &blk / det.sqrt();
    let bd = b.adjoint();
    let a = CMat::from_fn(2, 2, |r, c| {
        let sub = u.view((2 * r, 2 * c), (2, 2)).into_owned();
        (&bd * sub).trace() / C64::new(2.0, 0.0)
    });
    (a, b)
}

struct Kak {
    k1: (CMat, CMat),
    k2: (CMat, CMat),
    abc: [f64; 3],
}

fn diagonalize_real_pair(m2: &CMat) -> Result<(Matrix4<f64>, [C64; 4]), CompileError> {
    let re = Matrix4::from_fn(|i, j| 0.5 * (m2[(i, j)].re + m2[(j, i)].re));
    let im = Matrix4::from_fn(|i, j| 0.5 * (m2[(i, j)].im + m2[(j, i)].im));
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b41_4b00);
    let mut coeffs = (1.260_206_611_224_938_8, 0.223_178_490_467_220_27);
    for _ in 0..100 {
        let comb = re * coeffs.0 + im * coeffs.1;
        let eig = SymmetricEigen::new(comb);
        let p = eig.eigenvectors;
        let mut d = [C64::new(0.0, 0.0); 4];
        let mut err: f64 = 0.0;
        for k in 0..4 {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    s += p[(i, k)] * m2[(i, j)] * p[(j, k)];
                }
            }
            d[k] = s;
        }
        for i in 0..4 {
            for j in 0..4 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..4 {
                    s += p[(i, k)] * d[k] * p[(j, k)];
                }
                err = err.max((s - m2[(i, j)]).norm());
            }
        }
        if err <= 1e-13 {
            return Ok((p, d));
        }
        coeffs = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
    }
    Err(CompileError::NoConvergence)
}

fn decompose(target: &CMat) -> Result<(Kak, f64), CompileError> {
    let det = target.clone().determinant();
    let u = target * det.powf(-0.25);
    let q = magic_basis();
    let qd = q.adjoint();
    let up = &qd * &u * &q;
    let m2 = up.transpose() * &up;
    let (mut p, d) = diagonalize_real_pair(&m2)?;
    if p.determinant() < 0.0 {
        for i in 0..4 {
            p[(i, 3)] = -p[(i, 3)];
        }
    }
    let mut dd = [0.0; 4];
    for k in 0..3 {
        dd[k] = -d[k].arg() / 2.0;
    }
    dd[3] = -(dd[0] + dd[1] + dd[2]);
    let pc = CMat::from_fn(4, 4, |i, j| C64::new(p[(i, j)], 0.0));
    let phase_diag = CMat::from_fn(4, 4, |i, j| if i == j { C64::from_polar(1.0, dd[i]) } else { C64::new(0.0, 0.0) });
    let k1p = &up * &pc * &phase_diag;
    let k1 = &q * k1p * &qd;
    let k2 = &q * pc.transpose() * &qd;

    // exp(−i d_k) on the magic diagonal = e^{iφ} exp(i(aXX + bYY + cZZ))
    let paulis = pauli_pairs();
    let mut sys = nalgebra::Matrix4::<f64>::zeros();
    let mut rhs = nalgebra::Vector4::<f64>::zeros();
    for k in 0..4 {
        for (col, pp) in paulis.iter().enumerate() {
            let diag = (&qd * pp * &q)[(k, k)].re;
            sys[(k, col)] = diag;
        }
        sys[(k, 3)] = 1.0;
        rhs[k] = -dd[k];
    }
    let sol = sys.lu().solve(&rhs).ok_or(CompileError::NoConvergence)?;
    let (a1, b1) = split_product(&k1);
    let (a2, b2) = split_product(&k2);
    Ok((Kak { k1: (a1, b1), k2: (a2, b2), abc: [sol[0], sol[1], sol[2]] }, sol[3]))
}

/// Gate list realizing `target` on qubits (`qa`, `qb`), `qa` being the more
/// significant factor of the 4×4 matrix. Always three CNOTs, so the layout
/// is identical for every target.
pub fn kak_gates(target: &CMat, qa: usize, qb: usize) -> Result<Vec<Gate>, CompileError> {
    check_unitary(target, 4, 1e-10)?;
    let (kak, _) = decompose(target)?;
    let [a, b, c] = kak.abc;
    let (a1, b1) = kak.k1;
    let (a2, b2) = kak.k2;
    let id = CMat::identity(2, 2);

    // exp(i(aXX+bYY+cZZ)) = Rz(π/2)_a · CX(b→a) · Ry(π/2−2b)_b · CX(a→b)
    //   · [Rz(π/2−2c)_a ⊗ Ry(2a−π/2)_b] · CX(b→a) · Rz(−π/2)_b, read right to left
    let layer0 = (a2, rz(-FRAC_PI_2) * b2);
    let layer1 = (rz(FRAC_PI_2 - 2.0 * c), ry(2.0 * a - FRAC_PI_2));
    let layer2 = (id.clone(), ry(FRAC_PI_2 - 2.0 * b));
    let layer3 = (a1 * rz(FRAC_PI_2), b1);

    let mut gates = Vec::with_capacity(43);
    let local = |(ua, ub): (CMat, CMat), gates: &mut Vec<Gate>| {
        gates.extend(single_qubit_gates(&ua, qa));
        gates.extend(single_qubit_gates(&ub, qb));
    };
    local(layer0, &mut gates);
    gates.push(Gate::Cnot { control: qb, target: qa });
    local(layer1, &mut gates);
    gates.push(Gate::Cnot { control: qa, target: qb });
    local(layer2, &mut gates);
    gates.push(Gate::Cnot { control: qb, target: qa });
    local(layer3, &mut gates);
    Ok(gates)
}

/// Two-qubit circuit equal to `target` up to global phase.
pub fn kak_compile(target: &CMat) -> Result<Circuit, CompileError> {
    let mut c = Circuit::new(2);
    c.extend(kak_gates(target, 0, 1)?);
    c.target_checksum = Some(super::unitary_checksum(target));
    Ok(c)
}
