//! Molecules as networks of spin-1/2 nuclei, their zero-field Hamiltonians
//! and the weighted magnetization observable.

mod exact;
mod molecule;

pub use exact::{
    entanglement_entropy, evolve_exact, fid_exact, recurrence_period, return_fidelity, FidMode,
};
pub use molecule::{parse_molecule, read_molecule, write_molecule};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{embed, spin_half, Axis, CMatrix, HermitianEigen, C64};

/// Relative gyromagnetic ratio of carbon-13 (proton = 1).
pub const GAMMA_C13: f64 = 0.2514;
pub const GAMMA_H1: f64 = 1.0;

/// Largest register the dense oracle accepts by default.
pub const DEFAULT_DENSE_LIMIT: usize = 12;

/// Axis carrying the chemical-shift term `h_i S_i^a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldAxis {
    #[default]
    X,
    Z,
}

impl FieldAxis {
    pub fn axis(self) -> Axis {
        match self {
            FieldAxis::X => Axis::X,
            FieldAxis::Z => Axis::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spin {
    pub label: String,
    pub gamma: f64,
}

/// An immutable, validated description of a molecule's NMR-active spins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    spins: Vec<Spin>,
    couplings: BTreeMap<(usize, usize), f64>,
    shifts: Vec<f64>,
    clusters: Option<Vec<Vec<usize>>>,
    field_axis: FieldAxis,
}

/// Incremental constructor for [`SpinSystem`]; all validation happens in
/// [`SpinSystemBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct SpinSystemBuilder {
    spins: Vec<Spin>,
    couplings: Vec<(usize, usize, f64)>,
    shifts: Vec<(usize, f64)>,
    clusters: Option<Vec<Vec<usize>>>,
    field_axis: FieldAxis,
}

impl SpinSystemBuilder {
    pub fn spin(mut self, label: impl Into<String>, gamma: f64) -> Self {
        self.spins.push(Spin {
            label: label.into(),
            gamma,
        });
        self
    }

    /// Adds a J-coupling in Hz. Listing both `(i, j)` and `(j, i)` is
    /// allowed only if the values agree.
    pub fn coupling(mut self, i: usize, j: usize, hz: f64) -> Self {
        self.couplings.push((i, j, hz));
        self
    }

    pub fn shift(mut self, i: usize, hz: f64) -> Self {
        self.shifts.push((i, hz));
        self
    }

    pub fn clusters(mut self, clusters: Vec<Vec<usize>>) -> Self {
        self.clusters = Some(clusters);
        self
    }

    pub fn field_axis(mut self, axis: FieldAxis) -> Self {
        self.field_axis = axis;
        self
    }

    pub fn build(self) -> Result<SpinSystem> {
        let n = self.spins.len();
        if n == 0 {
            return Err(Error::InvalidSystem("no spins".into()));
        }
        for s in &self.spins {
            if !(s.gamma.is_finite() && s.gamma > 0.0) {
                return Err(Error::InvalidSystem(format!(
                    "spin {} has invalid gamma {}",
                    s.label, s.gamma
                )));
            }
        }
        let mut couplings = BTreeMap::new();
        for &(i, j, hz) in &self.couplings {
            if i >= n || j >= n {
                return Err(Error::InvalidSystem(format!(
                    "coupling ({i}, {j}) references a missing spin"
                )));
            }
            if i == j {
                return Err(Error::InvalidSystem(format!("self-coupling on spin {i}")));
            }
            if !hz.is_finite() {
                return Err(Error::InvalidSystem(format!("coupling ({i}, {j}) not finite")));
            }
            let key = (i.min(j), i.max(j));
            match couplings.get(&key) {
                Some(&prev) if prev != hz => {
                    return Err(Error::InvalidSystem(format!(
                        "non-symmetric coupling ({i}, {j}): {prev} vs {hz}"
                    )))
                }
                _ => {
                    couplings.insert(key, hz);
                }
            }
        }
        couplings.retain(|_, v| *v != 0.0);

        let mut shifts = vec![0.0; n];
        for &(i, hz) in &self.shifts {
            if i >= n {
                return Err(Error::InvalidSystem(format!("shift on missing spin {i}")));
            }
            if !hz.is_finite() {
                return Err(Error::InvalidSystem(format!("shift on spin {i} not finite")));
            }
            shifts[i] = hz;
        }

        if let Some(clusters) = &self.clusters {
            let mut seen = vec![false; n];
            for c in clusters {
                if c.is_empty() {
                    return Err(Error::InvalidSystem("empty cluster".into()));
                }
                for &i in c {
                    if i >= n || seen[i] {
                        return Err(Error::InvalidSystem(format!(
                            "cluster partition invalid at spin {i}"
                        )));
                    }
                    seen[i] = true;
                }
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                return Err(Error::InvalidSystem(format!(
                    "spin {i} is not covered by the cluster partition"
                )));
            }
        }

        Ok(SpinSystem {
            spins: self.spins,
            couplings,
            shifts,
            clusters: self.clusters,
            field_axis: self.field_axis,
        })
    }
}

impl SpinSystem {
    pub fn builder() -> SpinSystemBuilder {
        SpinSystemBuilder::default()
    }

    /// Methyl group of acetonitrile: three protons bonded to one carbon-13
    /// with `J = 136.2 Hz`, carried as a single cluster.
    pub fn acetonitrile() -> SpinSystem {
        let j = 136.2;
        SpinSystem::builder()
            .spin("H1", GAMMA_H1)
            .spin("H2", GAMMA_H1)
            .spin("H3", GAMMA_H1)
            .spin("C", GAMMA_C13)
            .coupling(0, 3, j)
            .coupling(1, 3, j)
            .coupling(2, 3, j)
            .clusters(vec![vec![0, 1, 2, 3]])
            .build()
            .expect("acetonitrile preset is valid")
    }

    pub fn n_spins(&self) -> usize {
        self.spins.len()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.spins.iter().map(|s| s.gamma).collect()
    }

    /// Coupling in Hz, zero when absent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Nonzero couplings `((i, j), J_Hz)` with `i < j`, in lexicographic order.
    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.couplings.iter().map(|(&k, &v)| (k, v))
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn clusters(&self) -> Option<&[Vec<usize>]> {
        self.clusters.as_deref()
    }

    pub fn field_axis(&self) -> FieldAxis {
        self.field_axis
    }

    pub fn with_clusters(&self, clusters: Option<Vec<Vec<usize>>>) -> Result<SpinSystem> {
        let mut b = self.to_builder();
        b.clusters = clusters;
        b.build()
    }

    pub fn with_field_axis(&self, axis: FieldAxis) -> SpinSystem {
        let mut s = self.clone();
        s.field_axis = axis;
        s
    }

    pub fn to_builder(&self) -> SpinSystemBuilder {
        SpinSystemBuilder {
            spins: self.spins.clone(),
            couplings: self.couplings().map(|((i, j), v)| (i, j, v)).collect(),
            shifts: self.shifts.iter().copied().enumerate().collect(),
            clusters: self.clusters.clone(),
            field_axis: self.field_axis,
        }
    }

    /// Index of the cluster containing spin `i`.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.clusters
            .as_ref()?
            .iter()
            .position(|c| c.contains(&i))
    }

    /// Symmetric coupling matrix in rad/s.
    pub fn coupling_matrix_rad(&self) -> Vec<Vec<f64>> {
        let n = self.n_spins();
        let mut m = vec![vec![0.0; n]; n];
        for ((i, j), hz) in self.couplings() {
            m[i][j] = 2.0 * PI * hz;
            m[j][i] = 2.0 * PI * hz;
        }
        m
    }

    pub fn shifts_rad(&self) -> Vec<f64> {
        self.shifts.iter().map(|h| 2.0 * PI * h).collect()
    }

    /// Weighted magnetization `Σ γ_i s_i^z` of every computational basis
    /// state, `|0⟩` being spin up.
    pub fn magnetization_basis(&self) -> MagnetizationBasis {
        let n = self.n_spins();
        let entries = (0..1usize << n)
            .map(|idx| {
                let m_tilde = self
                    .spins
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let down = (idx >> (n - 1 - i)) & 1 == 1;
                        if down {
                            -0.5 * s.gamma
                        } else {
                            0.5 * s.gamma
                        }
                    })
                    .sum();
                MagnetizationEntry {
                    basis_index: idx,
                    m_tilde,
                }
            })
            .collect();
        MagnetizationBasis { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetizationEntry {
    pub basis_index: usize,
    pub m_tilde: f64,
}

/// Eigenbasis of the weighted magnetization, which is the computational basis.
#[derive(Debug, Clone)]
pub struct MagnetizationBasis {
    entries: Vec<MagnetizationEntry>,
}

impl MagnetizationBasis {
    pub fn entries(&self) -> &[MagnetizationEntry] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.m_tilde).collect()
    }

    /// States with strictly positive magnetization, ordered by basis index.
    pub fn positive(&self) -> Vec<MagnetizationEntry> {
        self.entries
            .iter()
            .filter(|e| e.m_tilde > 1e-12)
            .copied()
            .collect()
    }
}

/// Diagonal operator `S̃^z_tot = Σ_i γ_i S_i^z`.
pub fn magnetization_operator(sys: &SpinSystem) -> CMatrix {
    let values = sys.magnetization_basis().values();
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&m| C64::new(m, 0.0)),
    ))
}

/// Dense Hamiltonian in rad/s with a lazily computed eigendecomposition.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    n_spins: usize,
    matrix: CMatrix,
    eigen: OnceLock<Arc<HermitianEigen>>,
}

impl HamiltonianMatrix {
    pub fn from_matrix(n_spins: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != 1 << n_spins || matrix.ncols() != 1 << n_spins {
            return Err(Error::param("matrix dimension does not match 2^n"));
        }
        Ok(HamiltonianMatrix {
            n_spins,
            matrix,
            eigen: OnceLock::new(),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Cached eigendecomposition; computed on first use.
    pub fn eigen(&self) -> Arc<HermitianEigen> {
        self.eigen
            .get_or_init(|| Arc::new(HermitianEigen::new(&self.matrix)))
            .clone()
    }

    /// `U(t) = exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.eigen().propagator(t)
    }
}

/// Builds `H = Σ_{i<j} J_ij S_i·S_j + Σ_i h_i S_i^a` in rad/s.
pub fn build_hamiltonian(sys: &SpinSystem) -> Result<HamiltonianMatrix> {
    build_hamiltonian_with_limit(sys, DEFAULT_DENSE_LIMIT)
}

pub fn build_hamiltonian_with_limit(sys: &SpinSystem, limit: usize) -> Result<HamiltonianMatrix> {
    let n = sys.n_spins();
    if n > limit {
        return Err(Error::DimensionLimit {
            what: "dense Hamiltonian",
            requested: n,
            limit,
        });
    }
    let matrix = local_hamiltonian(sys, &(0..n).collect::<Vec<_>>(), true);
    HamiltonianMatrix::from_matrix(n, matrix)
}

/// Hamiltonian restricted to `sites` (in the given order) acting on a
/// register of `sites.len()` qubits: couplings with both ends inside `sites`
/// and, when `with_fields`, the shifts of those sites.
pub(crate) fn local_hamiltonian(sys: &SpinSystem, sites: &[usize], with_fields: bool) -> CMatrix {
    let k = sites.len();
    let dim = 1usize << k;
    let ops: Vec<[CMatrix; 3]> = (0..k)
        .map(|slot| Axis::ALL.map(|a| embed(&spin_half(a), slot, k)))
        .collect();
    let mut h = CMatrix::zeros(dim, dim);
    for a in 0..k {
        for b in (a + 1)..k {
            let jhz = sys.coupling(sites[a], sites[b]);
            if jhz == 0.0 {
                continue;
            }
            let w = C64::new(2.0 * PI * jhz, 0.0);
            for ax in 0..3 {
                h += (&ops[a][ax] * &ops[b][ax]) * w;
            }
        }
    }
    if with_fields {
        let ax = match sys.field_axis() {
            FieldAxis::X => 0,
            FieldAxis::Z => 2,
        };
        for (slot, &site) in sites.iter().enumerate() {
            let hz = sys.shifts()[site];
            if hz != 0.0 {
                h += &ops[slot][ax] * C64::new(2.0 * PI * hz, 0.0);
            }
        }
    }
    h
}

/// Total spin operator `Σ_i S_i^a` (unweighted).
pub fn total_spin(n: usize, axis: Axis) -> CMatrix {
    let mut m = CMatrix::zeros(1 << n, 1 << n);
    for i in 0..n {
        m += embed(&spin_half(axis), i, n);
    }
    m
}
