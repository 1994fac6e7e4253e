//! Gate-level circuits, two-qubit depth accounting and the time-evolution
//! compilers.

mod compile;
mod text;

pub use compile::{
    compile_trotter_clustered, compile_trotter_plain, pad_circuit, AdaptiveCompiler, TrotterLayout,
    TrotterPlan, PAD_ANGLE,
};
pub use text::{format_circuit, parse_circuit};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{apply_local, kron, pauli, unitarity_defect, Axis, CMatrix, C64, ONE, ZERO};

/// Largest block the exact-exponentiation path accepts.
pub const MAX_BLOCK_QUBITS: usize = 7;

/// Two-qubit-gate cost charged for a generic `k`-qubit block unitary:
/// `⌈scale · (4^k − 3k − 1) / 4⌉`, the counting lower bound for a generic
/// unitary (3 for two qubits, 61 for four).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub scale: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { scale: 1.0 }
    }
}

impl CostModel {
    pub fn cost(&self, k: usize) -> usize {
        let k = k as u32;
        let raw = (4f64.powi(k as i32) - 3.0 * k as f64 - 1.0) / 4.0;
        (self.scale * raw).max(0.0).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Rx { theta: f64, qubit: usize },
    Ry { theta: f64, qubit: usize },
    Rz { theta: f64, qubit: usize },
    /// `exp(-i θ/2 X⊗X)`.
    IsingXX { theta: f64, qubits: [usize; 2] },
    IsingYY { theta: f64, qubits: [usize; 2] },
    IsingZZ { theta: f64, qubits: [usize; 2] },
    /// Exact multi-qubit unitary; `cost` is its two-qubit-gate charge.
    Block {
        qubits: Vec<usize>,
        unitary: Arc<CMatrix>,
        cost: usize,
    },
}

impl Gate {
    /// Validated block gate.
    pub fn block(qubits: Vec<usize>, unitary: CMatrix, cost: usize) -> Result<Gate> {
        let k = qubits.len();
        if k == 0 || k > MAX_BLOCK_QUBITS {
            return Err(Error::DimensionLimit {
                what: "block gate",
                requested: k,
                limit: MAX_BLOCK_QUBITS,
            });
        }
        if unitary.nrows() != 1 << k || unitary.ncols() != 1 << k {
            return Err(Error::param("block matrix size does not match its qubits"));
        }
        let defect = unitarity_defect(&unitary);
        if defect >= 1e-10 {
            return Err(Error::numeric(format!("block is not unitary (defect {defect:e})")));
        }
        Ok(Gate::Block {
            qubits,
            unitary: Arc::new(unitary),
            cost,
        })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => vec![*qubit],
            Gate::IsingXX { qubits, .. } | Gate::IsingYY { qubits, .. } | Gate::IsingZZ { qubits, .. } => {
                qubits.to_vec()
            }
            Gate::Block { qubits, .. } => qubits.clone(),
        }
    }

    /// Contribution to the two-qubit depth.
    pub fn two_qubit_cost(&self) -> usize {
        match self {
            Gate::Rx { .. } | Gate::Ry { .. } | Gate::Rz { .. } => 0,
            Gate::IsingXX { .. } | Gate::IsingYY { .. } | Gate::IsingZZ { .. } => 1,
            Gate::Block { cost, .. } => *cost,
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(self, Gate::Rx { .. } | Gate::Ry { .. } | Gate::Rz { .. })
    }

    /// Matrix on the gate's own qubits, first listed qubit most significant.
    pub fn matrix(&self) -> CMatrix {
        fn rotation(p: CMatrix, theta: f64) -> CMatrix {
            let d = p.nrows();
            CMatrix::identity(d, d) * C64::new((theta / 2.0).cos(), 0.0)
                - p * C64::new(0.0, (theta / 2.0).sin())
        }
        match self {
            Gate::Rx { theta, .. } => rotation(pauli(Axis::X), *theta),
            Gate::Ry { theta, .. } => rotation(pauli(Axis::Y), *theta),
            Gate::Rz { theta, .. } => {
                let h = theta / 2.0;
                CMatrix::from_row_slice(2, 2, &[C64::from_polar(1.0, -h), ZERO, ZERO, C64::from_polar(1.0, h)])
            }
            Gate::IsingXX { theta, .. } => rotation(kron(&pauli(Axis::X), &pauli(Axis::X)), *theta),
            Gate::IsingYY { theta, .. } => rotation(kron(&pauli(Axis::Y), &pauli(Axis::Y)), *theta),
            Gate::IsingZZ { theta, .. } => rotation(kron(&pauli(Axis::Z), &pauli(Axis::Z)), *theta),
            Gate::Block { unitary, .. } => (**unitary).clone(),
        }
    }
}

/// Ordered gate list on a fixed register with its two-qubit depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    two_qubit_depth: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            two_qubit_depth: 0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate after checking its qubit indices.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        for (a, &q) in qs.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::param(format!(
                    "qubit {q} out of range for a {}-qubit circuit",
                    self.n_qubits
                )));
            }
            if qs[..a].contains(&q) {
                return Err(Error::param(format!("qubit {q} repeated within one gate")));
            }
        }
        self.two_qubit_depth += gate.two_qubit_cost();
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn two_qubit_depth(&self) -> usize {
        self.two_qubit_depth
    }

    /// Noiseless unitary of the whole circuit.
    pub fn unitary(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut u = CMatrix::identity(dim, dim);
        let mut col = vec![ZERO; dim];
        for c in 0..dim {
            col.iter_mut().for_each(|z| *z = ZERO);
            col[c] = ONE;
            for g in &self.gates {
                apply_local(&mut col, self.n_qubits, &g.qubits(), &g.matrix());
            }
            for r in 0..dim {
                u[(r, c)] = col[r];
            }
        }
        u
    }
}

/// Two-qubit depth recomputed from the gate list.
pub fn depth(c: &Circuit) -> usize {
    c.gates().iter().map(Gate::two_qubit_cost).sum()
}
