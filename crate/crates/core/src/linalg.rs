// SPDX-License-Identifier: Apache-2.0
//! Dense linear-algebra helpers shared by every stage.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn kron<T: nalgebra::Scalar + Copy + std::ops::Mul<Output = T> + num_traits::Zero>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::from_element(ar * br, ac * bc, T::zero());
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Symmetric eigendecomposition with ascending eigenvalues. Each eigenvector
/// is sign-fixed so that its largest-magnitude component is positive.
pub fn sym_eigen(h: &RMat) -> (Vec<f64>, RMat) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = RMat::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[j]);
        let mut col = eig.eigenvectors.column(j).clone_owned();
        let mut pivot = 0;
        for i in 0..n {
            if col[i].abs() > col[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(k, &col);
    }
    (vals, vecs)
}

/// exp(−i H t) for real symmetric H (atomic units, ħ = 1).
pub fn expm_sym(h: &RMat, t: f64) -> CMat {
    let (vals, vecs) = sym_eigen(h);
    expm_from_eigen(&vals, &vecs, t)
}

pub fn expm_from_eigen(vals: &[f64], vecs: &RMat, t: f64) -> CMat {
    let n = vals.len();
    let mut out = CMat::zeros(n, n);
    for (k, &e) in vals.iter().enumerate() {
        let ph = C64::from_polar(1.0, -e * t);
        for i in 0..n {
            let vi = vecs[(i, k)] * ph;
            for j in 0..n {
                out[(i, j)] += vi * vecs[(j, k)];
            }
        }
    }
    out
}

/// min over φ of ‖a − e^{iφ} b‖_F.
pub fn phase_aligned_distance(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    a.iter().zip(b.iter()).map(|(x, y)| (x - y * ph).norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance of u†u from the identity.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    (u.adjoint() * u - CMat::identity(n, n)).norm()
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    unitarity_error(u) <= tol
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// diagonal phase correction.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(n, n, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng)) / 2f64.sqrt()
    });
    let qr = z.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            out[(i, j)] = q[(i, j)] * ph;
        }
    }
    out
}

pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> RMat {
    let a = RMat::from_fn(n, n, |_, _| standard_normal(rng));
    (&a + a.transpose()) * 0.5
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(n, |_, _| C64::new(standard_normal(rng), standard_normal(rng)));
    let nrm = v.norm();
    v / C64::new(nrm, 0.0)
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
