//! Exact dynamics through the cached eigendecomposition of the Hamiltonian.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{build_hamiltonian, HamiltonianMatrix, SpinSystem};
use crate::error::{Error, Result};
use crate::linalg::{HermitianEigen, C64, ZERO};

/// Imaginary residue above which an FID value signals a bug.
const IMAG_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidMode {
    /// `Tr[U† S̃ U S̃]`.
    FullTrace,
    /// `Σ_{m̃>0} m̃ ⟨m̃(t)|S̃|m̃(t)⟩`.
    PositiveOnly,
}

/// `U(t)|ψ⟩` through the eigenbasis of `h`.
pub fn evolve_exact(h: &HamiltonianMatrix, state: &[C64], t: f64) -> Result<Vec<C64>> {
    if !t.is_finite() {
        return Err(Error::param(format!("evolution time {t} is not finite")));
    }
    if state.len() != h.dim() {
        return Err(Error::param("state dimension does not match Hamiltonian"));
    }
    let eig = h.eigen();
    Ok(evolve_in_eigenbasis(&eig, state, t))
}

fn evolve_in_eigenbasis(eig: &HermitianEigen, state: &[C64], t: f64) -> Vec<C64> {
    let psi = DVector::from_column_slice(state);
    let mut coeffs = eig.vectors.adjoint() * psi;
    for (c, &e) in coeffs.iter_mut().zip(&eig.values) {
        *c *= C64::from_polar(1.0, -e * t);
    }
    (&eig.vectors * coeffs).iter().copied().collect()
}

/// Computational basis vector.
pub(crate) fn basis_state(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = C64::new(1.0, 0.0);
    v
}

/// `|⟨ψ(0)|ψ(t)⟩|²` for a computational basis state.
pub fn return_fidelity(h: &HamiltonianMatrix, basis_index: usize, t: f64) -> Result<f64> {
    let psi = evolve_exact(h, &basis_state(h.dim(), basis_index), t)?;
    Ok(psi[basis_index].norm_sqr())
}

/// Exact FID at each of `times` (seconds).
pub fn fid_exact(sys: &SpinSystem, times: &[f64], mode: FidMode) -> Result<Vec<f64>> {
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::param(format!("time {t} is not finite")));
    }
    let h = build_hamiltonian(sys)?;
    let eig = h.eigen();
    let mags = sys.magnetization_basis().values();
    match mode {
        FidMode::PositiveOnly => {
            let positive = sys.magnetization_basis().positive();
            let dim = h.dim();
            Ok(times
                .iter()
                .map(|&t| {
                    positive
                        .iter()
                        .map(|e| {
                            let psi = evolve_in_eigenbasis(&eig, &basis_state(dim, e.basis_index), t);
                            e.m_tilde * expectation_diag(&psi, &mags)
                        })
                        .sum()
                })
                .collect())
        }
        FidMode::FullTrace => {
            // Tr[U†SUS] = Σ_jk |M_jk|² e^{i(E_j − E_k)t} with M = V†SV.
            let v = &eig.vectors;
            let mut s_v = v.clone();
            for (r, mut row) in s_v.row_iter_mut().enumerate() {
                row *= C64::new(mags[r], 0.0);
            }
            let m = v.adjoint() * s_v;
            let weights = m.map(|z| z.norm_sqr());
            let e = &eig.values;
            times
                .iter()
                .map(|&t| {
                    let mut acc = ZERO;
                    for j in 0..e.len() {
                        for k in 0..e.len() {
                            acc += C64::from_polar(weights[(j, k)], (e[j] - e[k]) * t);
                        }
                    }
                    if acc.im.abs() > IMAG_TOLERANCE * acc.re.abs().max(1.0) {
                        return Err(Error::numeric(format!(
                            "FID imaginary residue {} at t = {t}",
                            acc.im
                        )));
                    }
                    Ok(acc.re)
                })
                .collect()
        }
    }
}

fn expectation_diag(psi: &[C64], diag: &[f64]) -> f64 {
    psi.iter().zip(diag).map(|(a, m)| a.norm_sqr() * m).sum()
}

/// Von Neumann entropy (bits) of the reduced state on `subsystem`.
pub fn entanglement_entropy(state: &[C64], n_qubits: usize, subsystem: &[usize]) -> Result<f64> {
    if state.len() != 1 << n_qubits {
        return Err(Error::param("state length is not 2^n"));
    }
    let mut sub: Vec<usize> = subsystem.to_vec();
    sub.sort_unstable();
    sub.dedup();
    if sub.is_empty() || sub.len() >= n_qubits || sub.iter().any(|&q| q >= n_qubits) {
        return Err(Error::param(
            "subsystem must be a proper nonempty subset of the register",
        ));
    }
    let rest: Vec<usize> = (0..n_qubits).filter(|q| !sub.contains(q)).collect();
    let da = 1usize << sub.len();
    let db = 1usize << rest.len();
    // psi reshaped as a (da × db) matrix
    let mut m = nalgebra::DMatrix::<C64>::zeros(da, db);
    for (idx, &amp) in state.iter().enumerate() {
        let bit = |q: usize| (idx >> (n_qubits - 1 - q)) & 1;
        let a = sub.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
        let b = rest.iter().fold(0, |acc, &q| (acc << 1) | bit(q));
        m[(a, b)] = amp;
    }
    let rho = &m * m.adjoint();
    let eig = HermitianEigen::new(&rho);
    Ok(eig
        .values
        .iter()
        .filter(|&&p| p > 1e-12)
        .map(|&p| -p * p.log2())
        .sum())
}

/// Smallest `P > 0` with `U(P) ∝ I`, if the Bohr frequencies of `h` are
/// commensurate with denominators up to `max_denominator`.
pub fn recurrence_period(h: &HamiltonianMatrix, max_denominator: u64) -> Option<f64> {
    let eig = h.eigen();
    let values = &eig.values;
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-9 * scale;
    let base = values[0];
    let mut freqs: Vec<f64> = values
        .iter()
        .map(|v| (v - base) / (2.0 * PI))
        .filter(|d| *d > tol / (2.0 * PI))
        .collect();
    if freqs.is_empty() {
        return None;
    }
    freqs.sort_by(f64::total_cmp);
    let smallest = freqs[0];
    let mut lcm_den: u64 = 1;
    for &f in &freqs {
        let (_, den) = best_rational(f / smallest, max_denominator)?;
        lcm_den = lcm(lcm_den, den);
        if lcm_den > max_denominator {
            return None;
        }
    }
    let fundamental = smallest / lcm_den as f64;
    let ftol = tol / (2.0 * PI);
    for &f in &freqs {
        let k = (f / fundamental).round();
        if (f - k * fundamental).abs() > ftol.max(1e-9 * f) {
            return None;
        }
    }
    Some(1.0 / fundamental)
}

fn best_rational(x: f64, max_den: u64) -> Option<(u64, u64)> {
    // continued-fraction convergents
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as u64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-9 * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 != 0 && ((h1 as f64 / k1 as f64) - x).abs() <= 1e-9 * x.abs().max(1.0) {
        Some((h1, k1))
    } else {
        None
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, unitarity_defect};

    fn two_spin() -> SpinSystem {
        SpinSystem::builder()
            .spin("a", 1.0)
            .spin("b", 1.0)
            .coupling(0, 1, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_hamiltonian(&SpinSystem::acetonitrile()).unwrap();
        let psi: Vec<C64> = (0..16).map(|k| C64::new(k as f64, 1.0)).collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let out = evolve_exact(&h, &psi, 0.0).unwrap();
        for (a, b) in psi.iter().zip(&out) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(evolve_exact(&h, &psi, f64::NAN).is_err());
    }

    #[test]
    fn two_spin_matches_direct_exponential() {
        // oracle: eigen-free Taylor series of exp(-iHt) on the 4x4 matrix
        let h = build_hamiltonian(&two_spin()).unwrap();
        let t = 0.5;
        let a = h.matrix() * C64::new(0.0, -t);
        let mut term = crate::linalg::CMatrix::identity(4, 4);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        let direct = sum[(1, 1)].norm_sqr();
        let via_eigen = return_fidelity(&h, 1, t).unwrap();
        assert!((direct - via_eigen).abs() < 1e-10, "{direct} vs {via_eigen}");
        // singlet-triplet: |01> = (T0 + S)/sqrt2, splitting J -> cos²(πJt)
        assert!((via_eigen - (PI * t).cos().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn propagator_unitarity() {
        let h = build_hamiltonian(&SpinSystem::acetonitrile()).unwrap();
        for t in [1e-4, 0.0123, 3.7] {
            assert!(unitarity_defect(&h.propagator(t)) < 1e-10);
        }
        let direct = expm_hermitian(h.matrix(), 0.01);
        assert!(crate::linalg::max_abs(&(direct - h.propagator(0.01))) < 1e-10);
    }

    #[test]
    fn entropy_of_product_and_bell() {
        let prod = basis_state(16, 0);
        for cut in [vec![0], vec![3], vec![0, 1], vec![1, 2, 3]] {
            assert!(entanglement_entropy(&prod, 4, &cut).unwrap().abs() < 1e-12);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
        assert!((entanglement_entropy(&bell, 2, &[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(entanglement_entropy(&bell, 2, &[]).is_err());
        assert!(entanglement_entropy(&bell, 2, &[0, 1]).is_err());
    }

    #[test]
    fn fid_flip_symmetry_without_fields() {
        let sys = SpinSystem::builder()
            .spin("a", 1.0)
            .spin("b", 0.7)
            .spin("c", 0.3)
            .coupling(0, 1, 12.0)
            .coupling(1, 2, -5.0)
            .build()
            .unwrap();
        let times = [0.0, 0.013, 0.2, 1.1];
        let full = fid_exact(&sys, &times, FidMode::FullTrace).unwrap();
        let pos = fid_exact(&sys, &times, FidMode::PositiveOnly).unwrap();
        for (f, p) in full.iter().zip(&pos) {
            assert!((f - 2.0 * p).abs() < 1e-9, "{f} vs {p}");
        }
    }

    #[test]
    fn acetonitrile_period_is_two_over_j() {
        let h = build_hamiltonian(&SpinSystem::acetonitrile()).unwrap();
        let p = recurrence_period(&h, 64).unwrap();
        assert!((p - 2.0 / 136.2).abs() < 1e-12, "{p}");
    }

    #[test]
    fn incommensurate_system_has_no_period() {
        let sys = SpinSystem::builder()
            .spin("a", 1.0)
            .spin("b", 1.0)
            .spin("c", 1.0)
            .coupling(0, 1, 10.0)
            .coupling(1, 2, 10.0 * 2f64.sqrt())
            .shift(0, std::f64::consts::E)
            .build()
            .unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        assert!(recurrence_period(&h, 64).is_none());
    }
}
