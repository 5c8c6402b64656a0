// SPDX-License-Identifier: Apache-2.0
//! Classical emulation of distributed, channel-factorized quantum wavepacket
//! dynamics: grids and Hamiltonians, tensor factorization into 1-D channels,
//! symmetry blocking, circuit compilation, simulated execution and spectral
//! reconstruction of vibrational energy ladders.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grid;
pub mod linalg;
pub mod tensor;
pub mod trace;
pub mod units;
pub mod compiler;
pub mod qsim;
pub mod symmetry;
pub mod spectral;
pub mod pipeline;
