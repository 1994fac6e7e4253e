use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{Circuit, CostModel, Gate, MAX_BLOCK_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::expm_hermitian;
use crate::spin_system::{build_hamiltonian, local_hamiltonian, FieldAxis, HamiltonianMatrix, SpinSystem};

/// Angle of the identity-composing padding pair `XX(θ₀)·XX(−θ₀)`.
pub const PAD_ANGLE: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrotterLayout {
    Plain,
    Clustered,
}

/// First-order product-formula schedule for one evolution time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterPlan {
    pub total_time: f64,
    pub steps: usize,
    pub layout: TrotterLayout,
    /// Two-qubit depth of a single step.
    pub gates_per_step: usize,
}

impl TrotterPlan {
    pub fn new(
        sys: &SpinSystem,
        total_time: f64,
        steps: usize,
        layout: TrotterLayout,
        cost: CostModel,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::param("Trotter step count must be at least 1"));
        }
        let one_step = match layout {
            TrotterLayout::Plain => compile_trotter_plain(sys, 1e-3, 1)?,
            TrotterLayout::Clustered => compile_trotter_clustered(sys, 1e-3, 1, cost)?,
        };
        Ok(TrotterPlan {
            total_time,
            steps,
            layout,
            gates_per_step: one_step.two_qubit_depth(),
        })
    }

    pub fn step_time(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    pub fn compile(&self, sys: &SpinSystem, cost: CostModel) -> Result<Circuit> {
        match self.layout {
            TrotterLayout::Plain => compile_trotter_plain(sys, self.total_time, self.steps),
            TrotterLayout::Clustered => compile_trotter_clustered(sys, self.total_time, self.steps, cost),
        }
    }
}

/// XX, YY then ZZ layers over `bonds` (lexicographic), each bond term
/// `J S_i·S_j` split as three `exp(-i πJΔt σσ/2)` Ising rotations.
fn push_bond_layers(c: &mut Circuit, bonds: &[((usize, usize), f64)], dt: f64) -> Result<()> {
    let mk: [fn(f64, [usize; 2]) -> Gate; 3] = [
        |theta, qubits| Gate::IsingXX { theta, qubits },
        |theta, qubits| Gate::IsingYY { theta, qubits },
        |theta, qubits| Gate::IsingZZ { theta, qubits },
    ];
    for make in mk {
        for &((i, j), hz) in bonds {
            c.push(make(PI * hz * dt, [i, j]))?;
        }
    }
    Ok(())
}

fn push_fields(c: &mut Circuit, sys: &SpinSystem, sites: impl Iterator<Item = usize>, dt: f64) -> Result<()> {
    for i in sites {
        let hz = sys.shifts()[i];
        if hz == 0.0 {
            continue;
        }
        let theta = 2.0 * PI * hz * dt;
        c.push(match sys.field_axis() {
            FieldAxis::X => Gate::Rx { theta, qubit: i },
            FieldAxis::Z => Gate::Rz { theta, qubit: i },
        })?;
    }
    Ok(())
}

/// Plain first-order product formula: per step all XX, all YY, all ZZ,
/// then the field rotations.
pub fn compile_trotter_plain(sys: &SpinSystem, total_time: f64, steps: usize) -> Result<Circuit> {
    if steps == 0 {
        return Err(Error::param("Trotter step count must be at least 1"));
    }
    if !total_time.is_finite() {
        return Err(Error::param("evolution time is not finite"));
    }
    let dt = total_time / steps as f64;
    let bonds: Vec<_> = sys.couplings().collect();
    let mut c = Circuit::new(sys.n_spins());
    for _ in 0..steps {
        push_bond_layers(&mut c, &bonds, dt)?;
        push_fields(&mut c, sys, 0..sys.n_spins(), dt)?;
    }
    Ok(c)
}

/// Cluster-exploiting product formula: per step one exact block per
/// cluster (intra-cluster couplings and cluster-local fields), then pairwise
/// Ising layers for the inter-cluster couplings.
pub fn compile_trotter_clustered(
    sys: &SpinSystem,
    total_time: f64,
    steps: usize,
    cost: CostModel,
) -> Result<Circuit> {
    if steps == 0 {
        return Err(Error::param("Trotter step count must be at least 1"));
    }
    if !total_time.is_finite() {
        return Err(Error::param("evolution time is not finite"));
    }
    let clusters = sys
        .clusters()
        .ok_or_else(|| Error::InvalidSystem("clustered compile needs a cluster partition".into()))?;
    if let Some(big) = clusters.iter().find(|c| c.len() > MAX_BLOCK_QUBITS) {
        return Err(Error::DimensionLimit {
            what: "cluster block",
            requested: big.len(),
            limit: MAX_BLOCK_QUBITS,
        });
    }
    let dt = total_time / steps as f64;
    let blocks: Vec<Gate> = clusters
        .iter()
        .map(|sites| {
            let h = local_hamiltonian(sys, sites, true);
            Gate::block(sites.clone(), expm_hermitian(&h, dt), cost.cost(sites.len()))
        })
        .collect::<Result<_>>()?;
    let inter: Vec<_> = sys
        .couplings()
        .filter(|&((i, j), _)| sys.cluster_of(i) != sys.cluster_of(j))
        .collect();
    let mut c = Circuit::new(sys.n_spins());
    for _ in 0..steps {
        c.extend(blocks.iter().cloned())?;
        push_bond_layers(&mut c, &inter, dt)?;
    }
    Ok(c)
}

/// Appends `XX(θ₀)·XX(−θ₀)` pairs until the two-qubit depth reaches
/// `target`; an odd remainder is filled with `XX(0)`. Successive pairs cycle
/// over all qubit pairs in lexicographic order, starting where a round-robin
/// layout of the existing `⌈depth/2⌉` gate pairs leaves off, so the added
/// noise exposure is spread evenly and continues a block's own cycle.
pub fn pad_circuit(c: &Circuit, target: usize) -> Result<Circuit> {
    let current = c.two_qubit_depth();
    if target < current {
        return Err(Error::param(format!(
            "padding target {target} is below the current depth {current}"
        )));
    }
    let mut out = c.clone();
    if target == current {
        return Ok(out);
    }
    let n = c.n_qubits();
    if n < 2 {
        return Err(Error::param("padding needs at least two qubits"));
    }
    let pairs: Vec<[usize; 2]> = (0..n).flat_map(|a| (a + 1..n).map(move |b| [a, b])).collect();
    let mut cycle = pairs.iter().cycle().skip(current.div_ceil(2) % pairs.len());
    let mut missing = target - current;
    while missing >= 2 {
        let &qubits = cycle.next().expect("cycle over a nonempty list");
        out.push(Gate::IsingXX { theta: PAD_ANGLE, qubits })?;
        out.push(Gate::IsingXX { theta: -PAD_ANGLE, qubits })?;
        missing -= 2;
    }
    if missing == 1 {
        let &qubits = cycle.next().expect("cycle over a nonempty list");
        out.push(Gate::IsingXX { theta: 0.0, qubits })?;
    }
    Ok(out)
}

/// Stand-in for numerical circuit synthesis of a whole small molecule.
///
/// Each evolution time compiles to one exact block `U(t)`. The block's
/// two-qubit charge grows linearly with the shortest evolution time that
/// produces the same unitary up to a global phase (the distance to the
/// nearest recurrence of `U`, or `t` itself when the spectrum has no
/// recurrence), saturating at `max_cost` once that time reaches
/// `1 / max|J|`. A synthesizer that finds short circuits for unitaries near
/// the identity shows the same depth oscillation at recurrences.
#[derive(Debug, Clone)]
pub struct AdaptiveCompiler {
    n_qubits: usize,
    hamiltonian: HamiltonianMatrix,
    period: Option<f64>,
    max_cost: usize,
    saturation_time: f64,
}

impl AdaptiveCompiler {
    pub fn new(sys: &SpinSystem, cost: CostModel) -> Result<Self> {
        let n = sys.n_spins();
        if n > MAX_BLOCK_QUBITS {
            return Err(Error::DimensionLimit {
                what: "adaptive block compile",
                requested: n,
                limit: MAX_BLOCK_QUBITS,
            });
        }
        let hamiltonian = build_hamiltonian(sys)?;
        let period = crate::spin_system::recurrence_period(&hamiltonian, 64);
        let jmax = sys.couplings().fold(0.0_f64, |a, (_, j)| a.max(j.abs()));
        let (max_cost, saturation_time) = if jmax > 0.0 {
            (cost.cost(n), 1.0 / jmax)
        } else {
            (0, f64::INFINITY)
        };
        Ok(AdaptiveCompiler {
            n_qubits: n,
            hamiltonian,
            period,
            max_cost,
            saturation_time,
        })
    }

    pub fn with_max_cost(mut self, max_cost: usize) -> Self {
        if self.saturation_time.is_finite() {
            self.max_cost = max_cost;
        }
        self
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn max_cost(&self) -> usize {
        self.max_cost
    }

    /// Shortest `τ ≥ 0` with `U(τ) ∝ U(t)` or `U(τ) ∝ U(t)†`.
    pub fn effective_time(&self, t: f64) -> f64 {
        match self.period {
            Some(p) => {
                let r = t.rem_euclid(p);
                r.min(p - r)
            }
            None => t.abs(),
        }
    }

    pub fn cost_at(&self, t: f64) -> usize {
        if self.max_cost == 0 {
            return 0;
        }
        let frac = (self.effective_time(t) / self.saturation_time).min(1.0);
        ((self.max_cost as f64 * frac) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn compile(&self, t: f64) -> Result<Circuit> {
        if !t.is_finite() {
            return Err(Error::param("evolution time is not finite"));
        }
        let mut c = Circuit::new(self.n_qubits);
        c.push(Gate::block(
            (0..self.n_qubits).collect(),
            self.hamiltonian.propagator(t),
            self.cost_at(t),
        )?)?;
        Ok(c)
    }
}
