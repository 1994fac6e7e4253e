//! Dense complex linear algebra helpers shared by the exact oracle, the
//! circuit compilers and the simulators.
//!
//! Qubit 0 is the leftmost tensor factor, so it maps to the most significant
//! bit of a basis index.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Spin-1/2 operator `S^a = σ^a / 2`.
pub fn spin_half(axis: Axis) -> CMatrix {
    let h = 0.5;
    match axis {
        Axis::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE * h, ONE * h, ZERO]),
        Axis::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I * h, I * h, ZERO]),
        Axis::Z => CMatrix::from_row_slice(2, 2, &[ONE * h, ZERO, ZERO, -ONE * h]),
    }
}

/// Pauli matrix `σ^a`.
pub fn pauli(axis: Axis) -> CMatrix {
    spin_half(axis) * C64::new(2.0, 0.0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embeds a single-site operator at `site` of an `n`-site register.
pub fn embed(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    let id = CMatrix::identity(2, 2);
    for k in 0..n {
        out = kron(&out, if k == site { op } else { &id });
    }
    out
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `‖U†U − I‖` measured entrywise.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(d, d)))
}

/// Distance between two unitaries after removing the best global phase.
pub fn phase_aligned_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap = (a.adjoint() * b).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    spectral_norm(&(a * phase - b))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let d = h.nrows();
        let mut vectors = CMatrix::zeros(d, d);
        for (new, &old) in order.iter().enumerate() {
            vectors.set_column(new, &eig.eigenvectors.column(old));
        }
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        HermitianEigen { values, vectors }
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases: Vec<C64> = self
            .values
            .iter()
            .map(|&e| C64::from_polar(1.0, -e * t))
            .collect();
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

/// Principal `k`-th root of a unitary.
///
/// `U` is normal, so its Hermitian part `A` and anti-Hermitian part `B`
/// commute and a generic combination `A + cB` shares its eigenvectors. A few
/// mixing constants are tried in case one maps two eigenvalues of `U` onto
/// the same value.
pub fn unitary_root(u: &CMatrix, k: usize) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::param("root order must be at least 1"));
    }
    if k == 1 {
        return Ok(u.clone());
    }
    if unitarity_defect(u) > 1e-8 {
        return Err(Error::numeric("matrix is not unitary"));
    }
    let half = C64::new(0.5, 0.0);
    let a = (u + u.adjoint()) * half;
    let b = (u - u.adjoint()) * (-I * half);
    for c in [0.577_215_664_9, 1.324_717_957_2, std::f64::consts::E] {
        let eig = HermitianEigen::new(&(&a + &b * C64::new(c, 0.0)));
        let v = &eig.vectors;
        let d = v.adjoint() * u * v;
        let mut off = 0.0_f64;
        for r in 0..d.nrows() {
            for col in 0..d.ncols() {
                if r != col {
                    off = off.max(d[(r, col)].norm());
                }
            }
        }
        if off > 1e-9 {
            continue;
        }
        let mut scaled = v.clone();
        for (j, mut column) in scaled.column_iter_mut().enumerate() {
            column *= C64::from_polar(1.0, d[(j, j)].arg() / k as f64);
        }
        return Ok(scaled * v.adjoint());
    }
    Err(Error::numeric("could not diagonalize unitary"))
}

/// Basis offsets for the target qubits, first target most significant in
/// the local index.
fn local_offsets(n_qubits: usize, targets: &[usize]) -> (Vec<usize>, usize) {
    let k = targets.len();
    let mut mask = 0usize;
    let mut offsets = vec![0usize; 1 << k];
    for (l, off) in offsets.iter_mut().enumerate() {
        for (j, &t) in targets.iter().enumerate() {
            let bit = (l >> (k - 1 - j)) & 1;
            *off |= bit << (n_qubits - 1 - t);
        }
    }
    for &t in targets {
        mask |= 1 << (n_qubits - 1 - t);
    }
    (offsets, mask)
}

/// Applies a `2^k × 2^k` matrix to the listed qubits of an amplitude vector
/// in place.
pub fn apply_local(amps: &mut [C64], n_qubits: usize, targets: &[usize], m: &CMatrix) {
    let dim = 1usize << targets.len();
    debug_assert_eq!(m.nrows(), dim);
    debug_assert_eq!(amps.len(), 1 << n_qubits);
    let (offsets, mask) = local_offsets(n_qubits, targets);
    let mut buf = vec![ZERO; dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (l, b) in buf.iter_mut().enumerate() {
            *b = amps[base | offsets[l]];
        }
        for r in 0..dim {
            let mut acc = ZERO;
            for c in 0..dim {
                acc += m[(r, c)] * buf[c];
            }
            amps[base | offsets[r]] = acc;
        }
    }
}
