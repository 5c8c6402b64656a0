// SPDX-License-Identifier: Apache-2.0
//! Dense statevector simulation and shot sampling.
//!
//! Qubit 0 is the most significant bit of the basis index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QsimError;
use crate::compiler::{Circuit, Gate};
use crate::linalg::C64;

pub const MAX_STATEVECTOR_WIDTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    pub amplitudes: Vec<C64>,
    pub width: usize,
}

impl Statevector {
    pub fn zero(width: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << width];
        amplitudes[0] = C64::new(1.0, 0.0);
        Statevector { amplitudes, width }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn bit_of(q: usize, width: usize) -> usize {
    1 << (width - 1 - q)
}

fn apply_1q(amps: &mut [C64], width: usize, q: usize, m: &[[C64; 2]; 2]) {
    let bit = bit_of(q, width);
    for i in 0..amps.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_cnot(amps: &mut [C64], width: usize, control: usize, target: usize) {
    let cb = bit_of(control, width);
    let tb = bit_of(target, width);
    for i in 0..amps.len() {
        if i & cb != 0 && i & tb == 0 {
            amps.swap(i, i | tb);
        }
    }
}

pub fn apply_gate(amps: &mut [C64], width: usize, g: &Gate) {
    match *g {
        Gate::Cnot { control, target } => apply_cnot(amps, width, control, target),
        Gate::Rz { qubit, .. } | Gate::SqrtX { qubit } | Gate::H { qubit } => {
            let m = g.matrix_1q().expect("single-qubit gate");
            apply_1q(amps, width, qubit, &m)
        }
    }
}

pub fn apply_gates(amps: &mut [C64], width: usize, gates: &[Gate]) {
    for g in gates {
        apply_gate(amps, width, g);
    }
}

/// Statevector after running `circuit` on |0…0⟩.
pub fn simulate(circuit: &Circuit) -> Result<Statevector, QsimError> {
    simulate_from(circuit, Statevector::zero(circuit.width))
}

pub fn simulate_from(circuit: &Circuit, mut state: Statevector) -> Result<Statevector, QsimError> {
    if circuit.width > MAX_STATEVECTOR_WIDTH {
        return Err(QsimError::TooWide { width: circuit.width, limit: MAX_STATEVECTOR_WIDTH });
    }
    if state.width != circuit.width {
        return Err(QsimError::WidthMismatch { state: state.width, circuit: circuit.width });
    }
    apply_gates(&mut state.amplitudes, circuit.width, &circuit.gates);
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl ShotHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }
}

/// Multinomial draw of `shots` outcomes from `probs` by inverse-CDF sampling.
pub fn sample_probabilities(probs: &[f64], shots: u64, seed: u64) -> Result<ShotHistogram, QsimError> {
    if shots == 0 {
        return Err(QsimError::NoShots);
    }
    let total: f64 = probs.iter().sum();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p.max(0.0) / total;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let r: f64 = rng.gen();
        let k = cdf.partition_point(|&c| c <= r).min(probs.len() - 1);
        counts[k] += 1;
    }
    Ok(ShotHistogram { counts, shots })
}

pub fn sample(state: &Statevector, shots: u64, seed: u64) -> Result<ShotHistogram, QsimError> {
    sample_probabilities(&state.probabilities(), shots, seed)
}
