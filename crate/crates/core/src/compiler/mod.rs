// SPDX-License-Identifier: Apache-2.0
//! Gate-level IR and the compilers that lower block unitaries onto it.

mod block;
mod diagonal;
mod kak;
mod oneq;
mod prep;

pub use block::{compile_block_diagonal, svd_block_factor, BlockUnitaryFactorization};
pub use diagonal::{compile_diagonal, diagonal_gates};
pub use kak::{kak_compile, kak_gates, magic_basis};
pub use oneq::{euler_zyz, single_qubit_gates};
pub use prep::{append_grid_basis_map, prepare_delta_state, PrepBasis};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{CMat, C64};

pub const KAK_CNOT_BUDGET: usize = 3;
pub const DIAGONAL_CNOT_COUNT: usize = 4;
pub const BLOCK_DIAGONAL_CNOT_BUDGET: usize = 10;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("target is not unitary (‖U†U − I‖ = {0:.3e})")]
    NotUnitary(f64),
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("diagonal entry {0} has modulus {1}, expected 1")]
    NotUnitModulus(usize, f64),
    #[error("factorization failed to reach tolerance (error {0:.3e})")]
    Reconstruction(f64),
    #[error("simultaneous diagonalization in the magic basis did not converge")]
    NoConvergence,
    #[error("grid index {index} out of range for width {width}")]
    IndexRange { index: usize, width: usize },
    #[error("grid point {0} is not a product state in this basis")]
    Entangled(usize),
    #[error("operation requires width {expected}, circuit has width {got}")]
    Width { expected: usize, got: usize },
    #[error("circuit parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Rz { qubit: usize, angle: f64 },
    SqrtX { qubit: usize },
    H { qubit: usize },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rz { qubit, .. } | Gate::SqrtX { qubit } | Gate::H { qubit } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// 2×2 matrix of a single-qubit gate.
    pub fn matrix_1q(&self) -> Option<[[C64; 2]; 2]> {
        let z = C64::new(0.0, 0.0);
        match *self {
            Gate::Rz { angle, .. } => Some([
                [C64::from_polar(1.0, -angle / 2.0), z],
                [z, C64::from_polar(1.0, angle / 2.0)],
            ]),
            Gate::SqrtX { .. } => {
                let p = C64::new(0.5, 0.5);
                let m = C64::new(0.5, -0.5);
                Some([[p, m], [m, p]])
            }
            Gate::H { .. } => {
                let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Some([[r, r], [r, -r]])
            }
            Gate::Cnot { .. } => None,
        }
    }
}

/// One serialized gate line: `{kind, qubits, angle}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: String,
    pub qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub angle: Option<f64>,
}

impl From<&Gate> for GateRecord {
    fn from(g: &Gate) -> Self {
        let (kind, angle) = match *g {
            Gate::Rz { angle, .. } => ("rz", Some(angle)),
            Gate::SqrtX { .. } => ("sx", None),
            Gate::H { .. } => ("h", None),
            Gate::Cnot { .. } => ("cx", None),
        };
        GateRecord { kind: kind.to_string(), qubits: g.qubits(), angle }
    }
}

impl TryFrom<&GateRecord> for Gate {
    type Error = CompileError;

    fn try_from(r: &GateRecord) -> Result<Self, Self::Error> {
        let q = |k: usize| {
            r.qubits
                .get(k)
                .copied()
                .ok_or_else(|| CompileError::Parse(format!("{} needs {} qubit(s)", r.kind, k + 1)))
        };
        match r.kind.as_str() {
            "rz" => Ok(Gate::Rz {
                qubit: q(0)?,
                angle: r.angle.ok_or_else(|| CompileError::Parse("rz without angle".into()))?,
            }),
            "sx" => Ok(Gate::SqrtX { qubit: q(0)? }),
            "h" => Ok(Gate::H { qubit: q(0)? }),
            "cx" => Ok(Gate::Cnot { control: q(0)?, target: q(1)? }),
            other => Err(CompileError::Parse(format!("unknown gate kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitHeader {
    pub width: usize,
    pub gates: usize,
    pub target_checksum: Option<String>,
    pub time_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
    pub target_checksum: Option<String>,
    pub time_index: Option<usize>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit { width, gates: Vec::new(), target_checksum: None, time_index: None }
    }

    pub fn push(&mut self, g: Gate) {
        debug_assert!(g.qubits().iter().all(|&q| q < self.width));
        self.gates.push(g);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) {
        for g in gates {
            self.push(g);
        }
    }

    /// `self` followed by `other` in time.
    pub fn then(mut self, other: &Circuit) -> Circuit {
        assert_eq!(self.width, other.width);
        self.gates.extend(other.gates.iter().copied());
        self
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn count_kind(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(g)).count()
    }

    /// Dense unitary, column k being the image of basis state k.
    pub fn unitary(&self) -> CMat {
        let dim = 1usize << self.width;
        let mut out = CMat::zeros(dim, dim);
        for k in 0..dim {
            let mut amps = vec![C64::new(0.0, 0.0); dim];
            amps[k] = C64::new(1.0, 0.0);
            crate::qsim::apply_gates(&mut amps, self.width, &self.gates);
            for (i, a) in amps.into_iter().enumerate() {
                out[(i, k)] = a;
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let header = CircuitHeader {
            width: self.width,
            gates: self.gates.len(),
            target_checksum: self.target_checksum.clone(),
            time_index: self.time_index,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for g in &self.gates {
            out.push_str(&serde_json::to_string(&GateRecord::from(g)).expect("gate serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Circuit, CompileError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| CompileError::Parse("empty circuit file".into()))?;
        let header: CircuitHeader =
            serde_json::from_str(head).map_err(|e| CompileError::Parse(format!("header: {e}")))?;
        let mut c = Circuit::new(header.width);
        c.target_checksum = header.target_checksum;
        c.time_index = header.time_index;
        for (i, l) in lines.enumerate() {
            let rec: GateRecord =
                serde_json::from_str(l).map_err(|e| CompileError::Parse(format!("gate {i}: {e}")))?;
            let g = Gate::try_from(&rec)?;
            if g.qubits().iter().any(|&q| q >= c.width) {
                return Err(CompileError::Parse(format!("gate {i} addresses a qubit outside width {}", c.width)));
            }
            c.gates.push(g);
        }
        if c.gates.len() != header.gates {
            return Err(CompileError::Parse(format!(
                "header declares {} gates, file has {}",
                header.gates,
                c.gates.len()
            )));
        }
        Ok(c)
    }
}

/// SHA-256 over the little-endian bytes of the entries (column-major), hex encoded.
pub fn unitary_checksum(u: &CMat) -> String {
    let mut h = Sha256::new();
    h.update((u.nrows() as u64).to_le_bytes());
    for z in u.iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub(crate) fn check_square(m: &CMat, n: usize) -> Result<(), CompileError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(CompileError::Shape { expected: n, rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

pub(crate) fn check_unitary(m: &CMat, n: usize, tol: f64) -> Result<(), CompileError> {
    check_square(m, n)?;
    let err = crate::linalg::unitarity_error(m);
    if err > tol {
        return Err(CompileError::NotUnitary(err));
    }
    Ok(())
}
