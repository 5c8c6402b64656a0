// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qdyn_core::compiler::{append_grid_basis_map, prepare_delta_state, Circuit, Gate, PrepBasis};
use qdyn_core::grid::{build_grid, daf_kinetic, DafKineticSpec};
use qdyn_core::qsim::{sample_probabilities, simulate};
use qdyn_core::spectral::{fold, power_spectrum, trace_fft, turnpike, SpectrumOptions};
use qdyn_core::symmetry::{givens_transform, hadamard_grid_readout};
use qdyn_core::tensor::schmidt_decompose;
use qdyn_core::trace::TimeTrace;
use qdyn_core::units::CoordUnit;

fn gate(width: usize) -> impl Strategy<Value = Gate> {
    let q = 0..width;
    prop_oneof![
        (q.clone(), -6.3..6.3f64).prop_map(|(qubit, angle)| Gate::Rz { qubit, angle }),
        q.clone().prop_map(|qubit| Gate::SqrtX { qubit }),
        q.clone().prop_map(|qubit| Gate::H { qubit }),
        (q.clone(), 1..width).prop_map(move |(control, shift)| Gate::Cnot { control, target: (control + shift) % width }),
    ]
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (2usize..=4).prop_flat_map(|w| {
        prop::collection::vec(gate(w), 0..40).prop_map(move |gates| {
            let mut c = Circuit::new(w);
            c.extend(gates);
            c
        })
    })
}

fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter_map("nonzero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn ladder() -> impl Strategy<Value = Vec<f64>> {
    // increasing spacings keep every pairwise gap distinct and the ladder widening
    (1.0..5.0f64, 0.3..3.0f64, 0.3..3.0f64).prop_map(|(a, b, c)| vec![0.0, a, 2.0 * a + b, 3.0 * a + 2.0 * b + c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(c in circuit()) {
        let s = simulate(&c).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        let u = c.unitary();
        let n = u.nrows();
        prop_assert!((u.adjoint() * &u - DMatrix::<C64>::identity(n, n)).norm() < 1e-10);
    }

    #[test]
    fn sampled_frequencies_stay_close(p in distribution(8), seed in any::<u64>()) {
        let shots = 2000;
        let h = sample_probabilities(&p, shots, seed).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>(), shots);
        let tv: f64 = 0.5 * h.frequencies().iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>();
        prop_assert!(tv <= 3.0 * (8.0 / shots as f64).sqrt(), "tv {}", tv);
        // same seed, same histogram
        prop_assert_eq!(h.counts, sample_probabilities(&p, shots, seed).unwrap().counts);
    }

    #[test]
    fn schmidt_factors_are_orthonormal(re in prop::collection::vec(-1.0..1.0f64, 64), im in prop::collection::vec(-1.0..1.0f64, 64)) {
        let mut psi = DMatrix::from_fn(8, 8, |i, j| C64::new(re[i * 8 + j], im[i * 8 + j]));
        let n = psi.norm();
        prop_assume!(n > 1e-3);
        psi /= C64::new(n, 0.0);
        let wp = schmidt_decompose(&psi, 1e-14).unwrap();
        let r = wp.rank();
        prop_assert!((wp.left.adjoint() * &wp.left - DMatrix::<C64>::identity(r, r)).norm() < 1e-10);
        prop_assert!((wp.right.adjoint() * &wp.right - DMatrix::<C64>::identity(r, r)).norm() < 1e-10);
        prop_assert!(wp.weights.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((wp.to_dense() - &psi).norm() < 1e-10);
    }

    #[test]
    fn daf_kinetic_is_symmetric_toeplitz(k in 2u32..=4, extent in 0.5..3.0f64, mass in 100.0..50_000.0f64) {
        let n = 1usize << k;
        let g = build_grid(n, extent, CoordUnit::Angstrom).unwrap();
        let m = daf_kinetic(&g, &DafKineticSpec::for_grid(&g, mass)).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(m[(i, j)], m[(0, i.abs_diff(j))]);
            }
        }
    }

    #[test]
    fn mirror_symmetric_hamiltonians_split_exactly(vals in prop::collection::vec(-1.0..1.0f64, 36)) {
        let n = 8;
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut it = vals.iter();
        for i in 0..n {
            for j in i..n {
                let (mi, mj) = (n - 1 - j, n - 1 - i);
                // fill each orbit of {transpose, reversal} once
                if (mi, mj) < (i, j) {
                    continue;
                }
                let v = *it.next().unwrap_or(&0.0);
                for (a, b) in [(i, j), (j, i), (n - 1 - i, n - 1 - j), (n - 1 - j, n - 1 - i)] {
                    h[(a, b)] = v;
                }
            }
        }
        let dec = givens_transform(&h).unwrap();
        prop_assert!(dec.offdiag_residual <= 1e-12);
    }

    #[test]
    fn basis_map_returns_every_grid_point(g in 0usize..8) {
        let c = append_grid_basis_map(prepare_delta_state(g, PrepBasis::Shuffled, 3).unwrap()).unwrap();
        let probs = simulate(&c).unwrap().probabilities();
        let grid = hadamard_grid_readout(&probs, 8).unwrap();
        for (x, p) in grid.iter().enumerate() {
            let want = if x == g { 1.0 } else { 0.0 };
            prop_assert!((p - want).abs() < 1e-12, "x {} p {}", x, p);
        }
    }

    #[test]
    fn spectra_respect_cauchy_schwarz(rows in prop::collection::vec(distribution(4), 9..40)) {
        let t = TimeTrace::new(1.0, rows);
        let d = trace_fft(&t, SpectrumOptions::RAW).unwrap();
        let bound = t.n_times() as f64;
        prop_assert!(d.max_magnitude() <= bound * (1.0 + 1e-12));
        let p = power_spectrum(&d, "p");
        prop_assert!(p.values.iter().all(|&v| v <= p.bound() * (1.0 + 1e-12)));
    }

    #[test]
    fn turnpike_ignores_peak_order(l in ladder(), seed in any::<u64>()) {
        let mut peaks = Vec::new();
        for i in 0..l.len() {
            for j in i + 1..l.len() {
                peaks.push(l[j] - l[i]);
            }
        }
        let a = turnpike(&peaks, 4, 1e-6).unwrap();
        let mut rot = peaks.clone();
        rot.rotate_left((seed % peaks.len() as u64) as usize);
        rot.reverse();
        prop_assert_eq!(&a, &turnpike(&rot, 4, 1e-6).unwrap());
        prop_assert!(a.iter().any(|s| s.iter().zip(&l).all(|(x, y)| (x - y).abs() < 1e-6)));
    }

    #[test]
    fn folding_lands_below_nyquist(nu in -1e3..1e3f64, fs in 0.1..100.0f64) {
        let f = fold(nu, fs);
        prop_assert!((0.0..=fs / 2.0 + 1e-9).contains(&f));
        prop_assert!((fold(nu + fs, fs) - f).abs() < 1e-9 * (1.0 + nu.abs()));
    }
}
