use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, pauli, Axis, CMatrix, C64, ONE, ZERO};

/// How a multi-qubit block gate is exposed to noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockNoise {
    /// The block's charged gates are laid out like padding pairs: for every
    /// two charged gates, a fractional power of the block unitary, then
    /// `XX(θ₀)`, noise, `XX(−θ₀)`, noise on the next qubit pair in
    /// lexicographic order. Noise therefore lands mid-circuit in the same
    /// frames as it does for padding gates.
    #[default]
    Interleaved,
    /// The whole unitary first, then `cost` two-qubit noise applications
    /// cycling over the block's qubit pairs.
    AfterBlock,
    /// Blocks are treated as noiseless.
    Off,
}

/// Per-gate noise rates. Damping rates apply to every qubit touched by a
/// two-qubit gate; depolarizing rates apply once per gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub amp_damping_2q: f64,
    pub phase_damping_2q: f64,
    pub depolarizing_1q: f64,
    pub depolarizing_2q: f64,
    pub block_noise: BlockNoise,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    /// Amplitude and phase damping on two-qubit gates only.
    pub fn damping(amp: f64, phase: f64) -> Self {
        NoiseModel {
            amp_damping_2q: amp,
            phase_damping_2q: phase,
            ..NoiseModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("amp_damping_2q", self.amp_damping_2q),
            ("phase_damping_2q", self.phase_damping_2q),
            ("depolarizing_1q", self.depolarizing_1q),
            ("depolarizing_2q", self.depolarizing_2q),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.amp_damping_2q == 0.0
            && self.phase_damping_2q == 0.0
            && self.depolarizing_1q == 0.0
            && self.depolarizing_2q == 0.0
    }
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    n_qubits: usize,
    ops: Vec<CMatrix>,
}

impl KrausChannel {
    /// Checks dimensions and completeness `Σ K†K = I` to 1e-12.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::param("empty Kraus set"))?;
        let dim = first.nrows();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::param("Kraus operators must act on whole qubits"));
        }
        if ops.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::param("Kraus operators differ in size"));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let defect = (sum - CMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::numeric(format!("Kraus set is not complete (defect {defect:e})")));
        }
        Ok(KrausChannel {
            n_qubits: dim.trailing_zeros() as usize,
            ops,
        })
    }

    pub fn amplitude_damping(p: f64) -> Result<Self> {
        check_probability(p)?;
        let s = C64::new((1.0 - p).sqrt(), 0.0);
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, s]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(p.sqrt(), 0.0), ZERO, ZERO]);
        KrausChannel::new(vec![k0, k1])
    }

    pub fn phase_damping(p: f64) -> Result<Self> {
        check_probability(p)?;
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::new((1.0 - p).sqrt(), 0.0)]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, C64::new(p.sqrt(), 0.0)]);
        KrausChannel::new(vec![k0, k1])
    }

    /// `ρ → (1−p)ρ + p·I/2^k` on `k` qubits (1 or 2).
    pub fn depolarizing(p: f64, k: usize) -> Result<Self> {
        check_probability(p)?;
        let paulis = [
            CMatrix::identity(2, 2),
            pauli(Axis::X),
            pauli(Axis::Y),
            pauli(Axis::Z),
        ];
        let strings: Vec<CMatrix> = match k {
            1 => paulis.to_vec(),
            2 => paulis
                .iter()
                .flat_map(|a| paulis.iter().map(move |b| kron(a, b)))
                .collect(),
            _ => return Err(Error::param("depolarizing channel supports 1 or 2 qubits")),
        };
        let n = strings.len() as f64;
        let ops = strings
            .into_iter()
            .enumerate()
            .map(|(idx, s)| {
                let w = if idx == 0 { 1.0 - p + p / n } else { p / n };
                s * C64::new(w.sqrt(), 0.0)
            })
            .collect();
        KrausChannel::new(ops)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// `Σ K ⊗ K̄`, the action on a row-major vectorized density matrix.
    pub fn superoperator(&self) -> CMatrix {
        let d = 1 << self.n_qubits;
        let mut s = CMatrix::zeros(d * d, d * d);
        for k in &self.ops {
            s += kron(k, &k.map(|z| z.conj()));
        }
        s
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{p} is not a probability")))
    }
}
