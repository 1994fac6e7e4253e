//! End-to-end FID generation: schedule, per-time-point circuits, backend
//! execution over every (time point, initial state) pair and readout.

use std::io::{Read, Write};

use qnmr::circuits::{
    compile_trotter_clustered, compile_trotter_plain, pad_circuit, AdaptiveCompiler, Circuit, CostModel,
};
use qnmr::cs_reconstruct::{poisson_gap_schedule, FidTrace, NusSchedule};
use qnmr::resources::{beta_clustered, beta_naive, trotter_steps_precision};
use qnmr::simulator::{
    measure_fid_point, run_density, run_statevector, Backend, FidRow, PopulationRecord,
};
use qnmr::spin_system::{build_hamiltonian, evolve_exact, read_molecule, HamiltonianMatrix, SpinSystem};
use qnmr::linalg::{C64, ZERO};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CircuitLayout, RunConfig, Steps};
use crate::error::{CliError, Result};

pub fn load_system(cfg: &RunConfig) -> Result<SpinSystem> {
    match &cfg.molecule {
        Some(path) => Ok(read_molecule(path)?),
        None => Ok(SpinSystem::acetonitrile()),
    }
}

pub fn make_schedule(cfg: &RunConfig) -> Result<NusSchedule> {
    Ok(match cfg.schedule.budget {
        None => NusSchedule::full(cfg.grid.n_grid),
        Some(b) => poisson_gap_schedule(cfg.grid.n_grid, b, cfg.schedule.alpha, cfg.schedule_seed())?,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when
/// `None`). Results never depend on the thread count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Readout of one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePoint {
    pub grid_index: usize,
    pub time_s: f64,
    pub fid: f64,
    /// Two-qubit depth of the executed circuit (0 for the exact backend).
    pub depth: usize,
    /// Trotter steps (0 when no product formula is involved).
    pub steps: usize,
    /// One readout per positive-magnetization initial state.
    pub readouts: Vec<PopulationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub backend: Backend,
    pub shots: u64,
    pub dt: f64,
    pub schedule: NusSchedule,
    pub initial_states: Vec<usize>,
    pub points: Vec<TimePoint>,
}

impl SimulationOutput {
    pub fn fid_rows(&self) -> Vec<FidRow> {
        self.points
            .iter()
            .map(|p| FidRow {
                time_s: p.time_s,
                fid_value: p.fid,
                n_shots: self.shots,
                backend: self.backend,
            })
            .collect()
    }

    pub fn trace(&self) -> Result<FidTrace> {
        let samples = self.points.iter().map(|p| (p.grid_index, p.fid)).collect();
        Ok(FidTrace::sampled(self.dt, self.schedule.n_grid, samples)?)
    }

    pub fn write_depths<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "two_qubit_depth", "trotter_steps"]).map_err(csv_io)?;
        for p in &self.points {
            w.serialize((p.time_s, p.depth, p.steps)).map_err(csv_io)?;
        }
        w.flush().map_err(|e| CliError::io("depths", e))
    }

    pub fn write_populations<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["time_s", "initial_state", "basis_state", "probability", "count"])
            .map_err(csv_io)?;
        for p in &self.points {
            for (&init, rec) in self.initial_states.iter().zip(&p.readouts) {
                for (j, &prob) in rec.probabilities().iter().enumerate() {
                    w.serialize(PopulationRow {
                        time_s: p.time_s,
                        initial_state: init,
                        basis_state: j,
                        probability: prob,
                        count: rec.counts().map(|c| c[j]),
                    })
                    .map_err(csv_io)?;
                }
            }
        }
        w.flush().map_err(|e| CliError::io("populations", e))
    }
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::config(format!("csv: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
struct PopulationRow {
    time_s: f64,
    initial_state: usize,
    basis_state: usize,
    probability: f64,
    count: Option<u64>,
}

/// Readouts grouped by time point, then initial state, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    pub times: Vec<f64>,
    pub initial_states: Vec<usize>,
    pub readouts: Vec<Vec<PopulationRecord>>,
}

pub fn read_populations<R: Read>(input: R) -> Result<PopulationTable> {
    let mut rows = Vec::new();
    for (k, r) in csv::Reader::from_reader(input).deserialize::<PopulationRow>().enumerate() {
        rows.push(r.map_err(|e| CliError::config(format!("populations row {}: {e}", k + 2)))?);
    }
    // (time, initial state) -> (probabilities, counts)
    let mut groups: Vec<(f64, usize, Vec<f64>, Vec<Option<u64>>)> = Vec::new();
    for r in rows {
        let start_new = match groups.last() {
            Some(g) => g.0 != r.time_s || g.1 != r.initial_state,
            None => true,
        };
        if start_new {
            if r.basis_state != 0 {
                return Err(CliError::config("population groups must start at basis state 0"));
            }
            groups.push((r.time_s, r.initial_state, Vec::new(), Vec::new()));
        }
        let g = groups.last_mut().expect("pushed above");
        if r.basis_state != g.2.len() {
            return Err(CliError::config("basis states must be listed in order"));
        }
        g.2.push(r.probability);
        g.3.push(r.count);
    }
    let mut table = PopulationTable {
        times: Vec::new(),
        initial_states: Vec::new(),
        readouts: Vec::new(),
    };
    for (t, init, probs, counts) in groups {
        let mut rec = PopulationRecord::from_probabilities(probs)?;
        if counts.iter().all(Option::is_some) {
            rec = rec.with_counts(counts.into_iter().flatten().collect())?;
        }
        if table.times.last() != Some(&t) {
            table.times.push(t);
            table.readouts.push(Vec::new());
        }
        let first = table.readouts.len() == 1;
        let slot = table.readouts.last_mut().expect("pushed above");
        if first {
            table.initial_states.push(init);
        } else if table.initial_states.get(slot.len()) != Some(&init) {
            return Err(CliError::config(format!("initial states at t = {t} differ from the first time point")));
        }
        slot.push(rec);
    }
    if table.times.is_empty() {
        return Err(CliError::config("population file is empty"));
    }
    Ok(table)
}

/// Per-time-point circuit source.
enum Engine {
    Exact(HamiltonianMatrix),
    Trotter { layout: CircuitLayout, beta: f64 },
    Adaptive(AdaptiveCompiler),
}

struct Plan<'a> {
    sys: &'a SpinSystem,
    cfg: &'a RunConfig,
    cost: CostModel,
    engine: Engine,
}

impl<'a> Plan<'a> {
    fn new(sys: &'a SpinSystem, cfg: &'a RunConfig) -> Result<Self> {
        let cost = CostModel {
            scale: cfg.trotter.cost_scale,
        };
        let engine = match (cfg.backend, cfg.trotter.layout) {
            (Backend::Exact, _) => Engine::Exact(build_hamiltonian(sys)?),
            (_, CircuitLayout::Adaptive) => Engine::Adaptive(AdaptiveCompiler::new(sys, cost)?),
            (_, layout) => {
                let beta = match layout {
                    CircuitLayout::Clustered => beta_clustered(sys)?.total,
                    _ => beta_naive(sys).total,
                };
                Engine::Trotter { layout, beta }
            }
        };
        Ok(Plan { sys, cfg, cost, engine })
    }

    fn steps_at(&self, t: f64, beta: f64) -> Result<usize> {
        match self.cfg.trotter.steps {
            Steps::Fixed(r) => Ok(r),
            Steps::Auto if t == 0.0 => Ok(1),
            Steps::Auto => {
                let r = trotter_steps_precision(beta, t, self.cfg.trotter.epsilon)?;
                if r > self.cfg.trotter.max_steps as u64 {
                    return Err(CliError::config(format!(
                        "automatic Trotter steps {r} at t = {t} exceed trotter.max_steps = {}; \
                         use a clustered layout, fewer points or a larger epsilon",
                        self.cfg.trotter.max_steps
                    )));
                }
                Ok(r as usize)
            }
        }
    }

    fn circuit_at(&self, t: f64) -> Result<Option<(Circuit, usize)>> {
        match &self.engine {
            Engine::Exact(_) => Ok(None),
            Engine::Adaptive(a) => Ok(Some((a.compile(t)?, 0))),
            Engine::Trotter { layout, beta } => {
                let r = self.steps_at(t, *beta)?;
                let c = match layout {
                    CircuitLayout::Plain => compile_trotter_plain(self.sys, t, r)?,
                    _ => compile_trotter_clustered(self.sys, t, r, self.cost)?,
                };
                Ok(Some((c, r)))
            }
        }
    }
}

fn basis_amplitudes(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = C64::new(1.0, 0.0);
    v
}

/// Simulates the configured backend at every scheduled time point. Work is
/// spread over the current rayon pool; results are assembled in schedule
/// order and shot noise for (time point, initial state) uses its own
/// stream of the master seed, so the output is independent of scheduling.
pub fn simulate(sys: &SpinSystem, cfg: &RunConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let schedule = make_schedule(cfg)?;
    let dt = cfg.grid.dt();
    let plan = Plan::new(sys, cfg)?;
    let initial_states: Vec<usize> = sys.magnetization_basis().positive().iter().map(|e| e.basis_index).collect();
    let times: Vec<(usize, f64)> = schedule.indices.iter().map(|&i| (i, i as f64 * dt)).collect();

    let mut circuits: Vec<Option<(Circuit, usize)>> =
        times.par_iter().map(|&(_, t)| plan.circuit_at(t)).collect::<Result<_>>()?;
    if cfg.padding {
        let target = circuits.iter().flatten().map(|(c, _)| c.two_qubit_depth()).max().unwrap_or(0);
        circuits = circuits
            .into_par_iter()
            .map(|entry| match entry {
                Some((c, r)) => Ok(Some((pad_circuit(&c, target)?, r))),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
    }

    let dim = 1usize << sys.n_spins();
    let points = times
        .par_iter()
        .zip(circuits.par_iter())
        .map(|(&(grid_index, t), circuit)| -> Result<TimePoint> {
            let mut readouts = Vec::with_capacity(initial_states.len());
            for (si, &init) in initial_states.iter().enumerate() {
                let rec = match (&plan.engine, circuit) {
                    (Engine::Exact(h), _) => {
                        PopulationRecord::from_amplitudes(&evolve_exact(h, &basis_amplitudes(dim, init), t)?)?
                    }
                    (_, Some((c, _))) if cfg.backend == Backend::TrotterNoisy => {
                        PopulationRecord::from_density(&run_density(c, init, &cfg.noise)?)?
                    }
                    (_, Some((c, _))) => PopulationRecord::from_amplitudes(&run_statevector(c, init)?)?,
                    (_, None) => unreachable!("circuit backends always compile a circuit"),
                };
                let rec = if cfg.shots > 0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(((grid_index as u64) << 32) | si as u64);
                    rec.sample(cfg.shots, &mut rng)?
                } else {
                    rec
                };
                readouts.push(rec);
            }
            Ok(TimePoint {
                grid_index,
                time_s: t,
                fid: measure_fid_point(sys, &readouts)?,
                depth: circuit.as_ref().map_or(0, |(c, _)| c.two_qubit_depth()),
                steps: circuit.as_ref().map_or(0, |(_, r)| *r),
                readouts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulationOutput {
        backend: cfg.backend,
        shots: cfg.shots,
        dt,
        schedule,
        initial_states,
        points,
    })
}
