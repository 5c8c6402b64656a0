// SPDX-License-Identifier: Apache-2.0
//! Single-qubit synthesis onto Rz and √X.

use std::f64::consts::PI;

use super::Gate;
use crate::linalg::{CMat, C64};

/// (θ, φ, λ, global phase) with U = e^{i·phase} Rz(φ) Ry(θ) Rz(λ).
pub fn euler_zyz(u: &CMat) -> (f64, f64, f64, f64) {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let coeff = det.sqrt().inv();
    let phase = -coeff.arg();
    let su = u * coeff;
    let theta = 2.0 * su[(1, 0)].norm().atan2(su[(0, 0)].norm());
    let plus = su[(1, 1)].arg();
    let minus = su[(1, 0)].arg();
    (theta, plus + minus, plus - minus, phase)
}

/// Five-gate ZXZXZ form: Rz(λ) √X Rz(θ+π) √X Rz(φ+π), equal to U up to phase.
pub fn single_qubit_gates(u: &CMat, qubit: usize) -> [Gate; 5] {
    let (theta, phi, lam, _) = euler_zyz(u);
    [
        Gate::Rz { qubit, angle: wrap(lam) },
        Gate::SqrtX { qubit },
        Gate::Rz { qubit, angle: wrap(theta + PI) },
        Gate::SqrtX { qubit },
        Gate::Rz { qubit, angle: wrap(phi + PI) },
    ]
}

/// Angle folded into (−π, π].
pub(crate) fn wrap(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

pub(crate) fn rz(theta: f64) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -theta / 2.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, theta / 2.0)],
    )
}

pub(crate) fn ry(theta: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::Circuit;
    use crate::linalg::{haar_unitary, phase_aligned_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zyz_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u = haar_unitary(2, &mut rng);
            let (t, p, l, ph) = euler_zyz(&u);
            let back = rz(p) * ry(t) * rz(l) * C64::from_polar(1.0, ph);
            assert!((back - &u).norm() < 1e-12);
        }
    }

    #[test]
    fn five_gate_form_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u = haar_unitary(2, &mut rng);
            let mut c = Circuit::new(1);
            c.extend(single_qubit_gates(&u, 0));
            assert!(phase_aligned_distance(&c.unitary(), &u) < 1e-12);
        }
        for u in [CMat::identity(2, 2), rz(PI), ry(PI)] {
            let mut c = Circuit::new(1);
            c.extend(single_qubit_gates(&u, 0));
            assert!(phase_aligned_distance(&c.unitary(), &u) < 1e-12);
        }
    }
}
