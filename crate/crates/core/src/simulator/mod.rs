//! State-vector and density-matrix execution of circuits, Kraus noise and
//! magnetization readout.

mod noise;
mod output;

pub use noise::{BlockNoise, KrausChannel, NoiseModel};
pub use output::{read_fid_csv, write_fid_csv, Backend, FidRow};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::circuits::{Circuit, Gate, PAD_ANGLE};
use crate::error::{Error, Result};
use crate::linalg::{apply_local, unitary_root, CMatrix, C64, ONE, ZERO};
use crate::spin_system::SpinSystem;

pub const STATEVECTOR_LIMIT: usize = 20;
pub const DENSITY_LIMIT: usize = 7;

/// Runs `c` on the computational basis state `initial`.
pub fn run_statevector(c: &Circuit, initial: usize) -> Result<Vec<C64>> {
    let n = c.n_qubits();
    if n > STATEVECTOR_LIMIT {
        return Err(Error::DimensionLimit {
            what: "state-vector simulation",
            requested: n,
            limit: STATEVECTOR_LIMIT,
        });
    }
    if initial >= 1 << n {
        return Err(Error::param(format!("basis state {initial} out of range for {n} qubits")));
    }
    let mut amps = vec![ZERO; 1 << n];
    amps[initial] = ONE;
    run_statevector_from(c, amps)
}

/// Runs `c` on an arbitrary amplitude vector.
pub fn run_statevector_from(c: &Circuit, mut amps: Vec<C64>) -> Result<Vec<C64>> {
    let n = c.n_qubits();
    if amps.len() != 1 << n {
        return Err(Error::param(format!(
            "state has {} amplitudes, circuit acts on {n} qubits",
            amps.len()
        )));
    }
    for g in c.gates() {
        apply_local(&mut amps, n, &g.qubits(), &g.matrix());
    }
    Ok(amps)
}

/// Density matrix stored row-major as a vector over `2N` qubits: the first
/// `N` index the row, the last `N` the column.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityState {
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[index * dim + index] = ONE;
        DensityState { n_qubits, data }
    }

    pub fn from_pure(amps: &[C64]) -> Self {
        let dim = amps.len();
        let mut data = Vec::with_capacity(dim * dim);
        for a in amps {
            for b in amps {
                data.push(a * b.conj());
            }
        }
        DensityState {
            n_qubits: dim.trailing_zeros() as usize,
            data,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(self.dim(), self.dim(), &self.data)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Diagonal of `ρ`, clamped at zero.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, amps: &[C64]) -> f64 {
        let dim = self.dim();
        let mut acc = ZERO;
        for r in 0..dim {
            for c in 0..dim {
                acc += amps[r].conj() * self.data[r * dim + c] * amps[c];
            }
        }
        acc.re
    }

    /// Unit trace, Hermiticity and positivity to the stated tolerances.
    pub fn check(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-9 {
            return Err(Error::numeric(format!("density trace drifted to {tr}")));
        }
        let m = self.to_matrix();
        let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::numeric(format!("density matrix not Hermitian ({herm:e})")));
        }
        let hermitian_part = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let min = hermitian_part
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::numeric(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn apply_unitary(&mut self, qubits: &[usize], u: &CMatrix) {
        let n = self.n_qubits;
        apply_local(&mut self.data, 2 * n, qubits, u);
        let cols: Vec<usize> = qubits.iter().map(|q| q + n).collect();
        apply_local(&mut self.data, 2 * n, &cols, &u.map(|z| z.conj()));
    }

    fn apply_superop(&mut self, qubits: &[usize], superop: &CMatrix) {
        let n = self.n_qubits;
        let targets: Vec<usize> = qubits.iter().copied().chain(qubits.iter().map(|q| q + n)).collect();
        apply_local(&mut self.data, 2 * n, &targets, superop);
    }
}

/// Superoperators for the channels of one noise model, built once per run.
struct NoiseOps {
    amp: Option<CMatrix>,
    phase: Option<CMatrix>,
    dep1: Option<CMatrix>,
    dep2: Option<CMatrix>,
    block: BlockNoise,
}

impl NoiseOps {
    fn new(m: &NoiseModel) -> Result<Self> {
        m.validate()?;
        let build = |p: f64, ch: fn(f64) -> Result<KrausChannel>| -> Result<Option<CMatrix>> {
            Ok(if p > 0.0 { Some(ch(p)?.superoperator()) } else { None })
        };
        Ok(NoiseOps {
            amp: build(m.amp_damping_2q, KrausChannel::amplitude_damping)?,
            phase: build(m.phase_damping_2q, KrausChannel::phase_damping)?,
            dep1: build(m.depolarizing_1q, |p| KrausChannel::depolarizing(p, 1))?,
            dep2: build(m.depolarizing_2q, |p| KrausChannel::depolarizing(p, 2))?,
            block: m.block_noise,
        })
    }

    /// Noise following one two-qubit gate on `pair`.
    fn two_qubit(&self, rho: &mut DensityState, pair: [usize; 2]) {
        if let Some(s) = &self.amp {
            for q in pair {
                rho.apply_superop(&[q], s);
            }
        }
        if let Some(s) = &self.phase {
            for q in pair {
                rho.apply_superop(&[q], s);
            }
        }
        if let Some(s) = &self.dep2 {
            rho.apply_superop(&pair, s);
        }
    }

    fn after_gate(&self, rho: &mut DensityState, g: &Gate) {
        match g {
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => {
                if let Some(s) = &self.dep1 {
                    rho.apply_superop(&[*qubit], s);
                }
            }
            Gate::IsingXX { qubits, .. } | Gate::IsingYY { qubits, .. } | Gate::IsingZZ { qubits, .. } => {
                self.two_qubit(rho, *qubits)
            }
            Gate::Block { .. } => {}
        }
    }

    /// Applies a block with its noise according to the block policy.
    fn block(&self, rho: &mut DensityState, qubits: &[usize], u: &CMatrix, cost: usize) -> Result<()> {
        if self.block == BlockNoise::Off || qubits.len() < 2 || cost == 0 {
            rho.apply_unitary(qubits, u);
            return Ok(());
        }
        let mut pairs = Vec::new();
        for a in 0..qubits.len() {
            for b in a + 1..qubits.len() {
                pairs.push([qubits[a], qubits[b]]);
            }
        }
        if self.block == BlockNoise::AfterBlock {
            rho.apply_unitary(qubits, u);
            for k in 0..cost {
                self.two_qubit(rho, pairs[k % pairs.len()]);
            }
            return Ok(());
        }
        // Charged gates come in pairs shaped like the padding pairs:
        // slice, XX(θ₀), noise, XX(−θ₀), noise. An odd last gate is a slice
        // followed by noise.
        let slice = unitary_root(u, cost.div_ceil(2))?;
        let plus = Gate::IsingXX { theta: PAD_ANGLE, qubits: [0, 1] }.matrix();
        let minus = Gate::IsingXX { theta: -PAD_ANGLE, qubits: [0, 1] }.matrix();
        for k in 0..cost {
            let pair = pairs[(k / 2) % pairs.len()];
            if k % 2 == 0 {
                rho.apply_unitary(qubits, &slice);
                if k + 1 < cost {
                    rho.apply_unitary(&pair, &plus);
                }
            } else {
                rho.apply_unitary(&pair, &minus);
            }
            self.two_qubit(rho, pair);
        }
        Ok(())
    }
}

/// Noisy execution: each gate is followed by its noise channels
/// (amplitude damping, then phase damping, then depolarizing).
pub fn run_density(c: &Circuit, initial: usize, noise: &NoiseModel) -> Result<DensityState> {
    let n = c.n_qubits();
    if n > DENSITY_LIMIT {
        return Err(Error::DimensionLimit {
            what: "density-matrix simulation",
            requested: n,
            limit: DENSITY_LIMIT,
        });
    }
    if initial >= 1 << n {
        return Err(Error::param(format!("basis state {initial} out of range for {n} qubits")));
    }
    let ops = NoiseOps::new(noise)?;
    let mut rho = DensityState::basis(n, initial);
    for g in c.gates() {
        match g {
            Gate::Block { qubits, unitary, cost } => ops.block(&mut rho, qubits, unitary, *cost)?,
            _ => {
                rho.apply_unitary(&g.qubits(), &g.matrix());
                ops.after_gate(&mut rho, g);
            }
        }
    }
    Ok(rho)
}

/// Computational-basis readout of one prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRecord {
    probabilities: Vec<f64>,
    counts: Option<Vec<u64>>,
}

impl PopulationRecord {
    /// Normalizes after clamping tiny negative values from round-off.
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < -1e-9) {
            return Err(Error::numeric("populations must be finite and nonnegative"));
        }
        let p: Vec<f64> = p.into_iter().map(|x| x.max(0.0)).collect();
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::numeric(format!("populations sum to {total}")));
        }
        Ok(PopulationRecord {
            probabilities: p.into_iter().map(|x| x / total).collect(),
            counts: None,
        })
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        PopulationRecord::from_probabilities(amps.iter().map(|a| a.norm_sqr()).collect())
    }

    pub fn from_density(rho: &DensityState) -> Result<Self> {
        PopulationRecord::from_probabilities(rho.populations())
    }

    /// Draws `shots` samples; the empirical distribution then replaces the
    /// exact one in [`PopulationRecord::distribution`].
    pub fn sample<R: Rng>(mut self, shots: u64, rng: &mut R) -> Result<Self> {
        if shots == 0 {
            return Err(Error::param("shot count must be positive"));
        }
        let dist = WeightedIndex::new(&self.probabilities)
            .map_err(|e| Error::numeric(format!("cannot sample populations: {e}")))?;
        let mut counts = vec![0u64; self.probabilities.len()];
        for _ in 0..shots {
            counts[dist.sample(rng)] += 1;
        }
        self.counts = Some(counts);
        Ok(self)
    }

    /// Attaches previously drawn counts, e.g. when reading a stored run.
    pub fn with_counts(mut self, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != self.probabilities.len() {
            return Err(Error::param("one count per basis state is required"));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::param("counts are all zero"));
        }
        self.counts = Some(counts);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn shots(&self) -> u64 {
        self.counts.as_ref().map_or(0, |c| c.iter().sum())
    }

    /// Empirical frequencies when sampled, exact probabilities otherwise.
    pub fn distribution(&self) -> Vec<f64> {
        match &self.counts {
            Some(c) => {
                let total = c.iter().sum::<u64>() as f64;
                c.iter().map(|&k| k as f64 / total).collect()
            }
            None => self.probabilities.clone(),
        }
    }
}

/// `Σ_n m̃_n ⟨S̃^z⟩_n` over the positive-magnetization initial states, one
/// record per state in basis-index order.
pub fn measure_fid_point(sys: &SpinSystem, records: &[PopulationRecord]) -> Result<f64> {
    let basis = sys.magnetization_basis();
    let positive = basis.positive();
    if records.len() != positive.len() {
        return Err(Error::param(format!(
            "expected {} readouts (one per positive-magnetization state), got {}",
            positive.len(),
            records.len()
        )));
    }
    let m = basis.values();
    let mut fid = 0.0;
    for (entry, rec) in positive.iter().zip(records) {
        if rec.dim() != m.len() {
            return Err(Error::param("readout dimension does not match the spin system"));
        }
        let expect: f64 = rec.distribution().iter().zip(&m).map(|(p, mj)| p * mj).sum();
        fid += entry.m_tilde * expect;
    }
    Ok(fid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{compile_trotter_plain, CostModel};
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_circuit_keeps_basis_state() {
        let s = run_statevector(&Circuit::new(4), 0b0101).unwrap();
        assert_eq!(s[0b0101], ONE);
        assert!(run_statevector(&Circuit::new(2), 4).is_err());
        assert!(run_statevector(&Circuit::new(21), 0).is_err());
    }

    #[test]
    fn complete_phase_damping_dephases() {
        let mut c = Circuit::new(2);
        c.push(Gate::IsingXX { theta: std::f64::consts::FRAC_PI_2, qubits: [0, 1] }).unwrap();
        let rho = run_density(&c, 0, &NoiseModel::damping(0.0, 1.0)).unwrap();
        rho.check().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                if r != col {
                    assert!(rho.get(r, col).norm() < 1e-12);
                }
            }
        }
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-12);
        assert!((rho.get(3, 3).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_density_matches_statevector() {
        let sys = SpinSystem::acetonitrile();
        let c = compile_trotter_plain(&sys, 0.003, 2).unwrap();
        let psi = run_statevector(&c, 3).unwrap();
        let rho = run_density(&c, 3, &NoiseModel::noiseless()).unwrap();
        assert!(max_abs(&(rho.to_matrix() - DensityState::from_pure(&psi).to_matrix())) < 1e-9);
    }

    #[test]
    fn amplitude_damping_relaxes_towards_zero_state() {
        let mut c = Circuit::new(2);
        for _ in 0..200 {
            c.push(Gate::IsingZZ { theta: 0.0, qubits: [0, 1] }).unwrap();
        }
        let rho = run_density(&c, 0b11, &NoiseModel::damping(0.05, 0.0)).unwrap();
        rho.check().unwrap();
        assert!(rho.get(0, 0).re > 0.9999);
    }

    #[test]
    fn block_noise_follows_cost() {
        let sys = SpinSystem::acetonitrile();
        let c = crate::circuits::compile_trotter_clustered(&sys, 0.002, 1, CostModel::default()).unwrap();
        let noisy = run_density(&c, 1, &NoiseModel::damping(0.0, 0.01)).unwrap();
        let off = NoiseModel {
            block_noise: BlockNoise::Off,
            ..NoiseModel::damping(0.0, 0.01)
        };
        let clean = run_density(&c, 1, &off).unwrap();
        let psi = run_statevector(&c, 1).unwrap();
        assert!((clean.fidelity_with_pure(&psi) - 1.0).abs() < 1e-12);
        assert!(noisy.fidelity_with_pure(&psi) < 1.0 - 1e-4);
    }

    #[test]
    fn identity_block_matches_explicit_padding_pair() {
        let noise = NoiseModel::damping(0.02, 0.05);
        let mut block = Circuit::new(2);
        block.push(Gate::block(vec![0, 1], CMatrix::identity(4, 4), 2).unwrap()).unwrap();
        let mut pads = Circuit::new(2);
        pads.push(Gate::IsingXX { theta: PAD_ANGLE, qubits: [0, 1] }).unwrap();
        pads.push(Gate::IsingXX { theta: -PAD_ANGLE, qubits: [0, 1] }).unwrap();
        for initial in 0..4 {
            let a = run_density(&block, initial, &noise).unwrap().to_matrix();
            let b = run_density(&pads, initial, &noise).unwrap().to_matrix();
            assert!(max_abs(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn interleaved_block_is_exact_without_noise() {
        let sys = SpinSystem::acetonitrile();
        let c = crate::circuits::AdaptiveCompiler::new(&sys, CostModel::default())
            .unwrap()
            .compile(0.0031)
            .unwrap();
        let rho = run_density(&c, 3, &NoiseModel::noiseless()).unwrap();
        let psi = run_statevector(&c, 3).unwrap();
        assert!((rho.fidelity_with_pure(&psi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shot_sampling_is_seeded_and_counts_add_up() {
        let rec = PopulationRecord::from_probabilities(vec![0.25, 0.5, 0.25, 0.0]).unwrap();
        let a = rec.clone().sample(1000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = rec.sample(1000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots(), 1000);
        assert_eq!(a.counts().unwrap()[3], 0);
    }

    #[test]
    fn fid_point_at_zero_time() {
        let sys = SpinSystem::acetonitrile();
        let basis = sys.magnetization_basis();
        let recs: Vec<_> = basis
            .positive()
            .iter()
            .map(|e| run_statevector(&Circuit::new(4), e.basis_index).unwrap())
            .map(|s| PopulationRecord::from_amplitudes(&s).unwrap())
            .collect();
        let expect: f64 = basis.positive().iter().map(|e| e.m_tilde * e.m_tilde).sum();
        assert!((measure_fid_point(&sys, &recs).unwrap() - expect).abs() < 1e-12);
        assert!(measure_fid_point(&sys, &recs[..3]).is_err());
    }
}
