// SPDX-License-Identifier: Apache-2.0
//! Shared fixtures for the criterion benches.

use qdyn_core::grid::{build_grid, daf_kinetic, synthetic_pes, DafKineticSpec, PotentialSurface, SyntheticPesParams, DEFAULT_TORSION_MASS};
use qdyn_core::linalg::{expm_sym, haar_unitary, random_state, CMat};
use qdyn_core::trace::TimeTrace;
use qdyn_core::units::{fs_to_au, CoordUnit, PROTON_MASS_ME};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unitary_pair(n: usize, seed: u64) -> (CMat, CMat) {
    let mut r = rng(seed);
    (haar_unitary(n, &mut r), haar_unitary(n, &mut r))
}

/// Default 8×8 model with its kinetic propagators for one step of `dt_fs`.
pub struct Model {
    pub surface: PotentialSurface,
    pub kin1: CMat,
    pub kin2: CMat,
    pub psi: CMat,
}

pub fn model(dt_fs: f64) -> Model {
    let g1 = build_grid(8, 1.1, CoordUnit::Angstrom).unwrap();
    let g2 = build_grid(8, 70.0, CoordUnit::Degree).unwrap();
    let k1 = daf_kinetic(&g1, &DafKineticSpec::for_grid(&g1, PROTON_MASS_ME)).unwrap();
    let k2 = daf_kinetic(&g2, &DafKineticSpec::for_grid(&g2, DEFAULT_TORSION_MASS)).unwrap();
    let surface = synthetic_pes(&SyntheticPesParams::default(), &g1, &g2).unwrap();
    let v = random_state(64, &mut rng(3));
    Model {
        surface,
        kin1: expm_sym(&k1, fs_to_au(dt_fs)),
        kin2: expm_sym(&k2, fs_to_au(dt_fs)),
        psi: CMat::from_fn(8, 8, |i, j| v[i * 8 + j]),
    }
}

/// Random probability trace with `n_times` rows over `n_points` grid points.
pub fn trace(n_times: usize, n_points: usize, seed: u64) -> TimeTrace {
    let mut r = rng(seed);
    let slices = (0..n_times)
        .map(|_| {
            let row: Vec<f64> = (0..n_points).map(|_| r.gen::<f64>()).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|x| x / s).collect()
        })
        .collect();
    TimeTrace::new(2.5, slices)
}
