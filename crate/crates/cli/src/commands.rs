//! Subcommand implementations. Each writes its files into an output
//! directory together with a `manifest.json` that records every parameter.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use qnmr::circuits::{CostModel, TrotterLayout, TrotterPlan};
use qnmr::cs_reconstruct::{
    fit_lorentzian_peaks, ist_s_reconstruct, poisson_gap_schedule, write_peaks_csv, zero_padded_spectrum, FidTrace,
    IstOptions, NusSchedule, PeakOptions, PeakReport, Spectrum, SpectrumKind,
};
use qnmr::metrics::{bc_series_spectrum, FidelitySeries};
use qnmr::resources::{beta_clustered, beta_naive, design_curve, BetaBound, ResourceEstimate};
use qnmr::simulator::{read_fid_csv, write_fid_csv};
use qnmr::spin_system::{read_molecule, SpinSystem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{load_system, read_populations, simulate, SimulationOutput};

/// Output directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    plot_data: bool,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>, plot_data: bool) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Outputs {
            dir,
            plot_data,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Two-column `x,y` file, written only in plot-data mode.
    pub fn xy(&mut self, name: &str, header: [&str; 2], points: impl Iterator<Item = (f64, f64)>) -> Result<()> {
        if !self.plot_data {
            return Ok(());
        }
        self.write(name, |w| {
            writeln!(w, "{},{}", header[0], header[1]).map_err(|e| CliError::io(name, e))?;
            for (x, y) in points {
                writeln!(w, "{x},{y}").map_err(|e| CliError::io(name, e))?;
            }
            Ok(())
        })
    }

    fn spectrum(&mut self, stem: &str, s: &Spectrum) -> Result<()> {
        self.write(&format!("{stem}.csv"), |w| Ok(s.write_csv(w)?))?;
        let mags = s.magnitudes();
        self.xy(
            &format!("{stem}.xy.csv"),
            ["freq_Hz", "magnitude"],
            (0..s.len()).map(|k| (s.freq(k), mags[k])),
        )
    }

    fn peaks(&mut self, name: &str, report: &PeakReport) -> Result<()> {
        self.write(name, |w| Ok(write_peaks_csv(report, w)?))
    }

    /// Writes `manifest.json` listing everything written before it.
    pub fn manifest(&mut self, command: &str, parameters: Value, system: Option<&SpinSystem>) -> Result<()> {
        let manifest = Manifest {
            tool: "qnmr",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters,
            system: system.map(SystemSummary::new),
            outputs: self.written.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        self.write("manifest.json", |w| {
            writeln!(w, "{text}").map_err(|e| CliError::io("manifest.json", e))
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    parameters: Value,
    system: Option<SystemSummary>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct SystemSummary {
    spins: Vec<(String, f64)>,
    couplings_hz: Vec<(usize, usize, f64)>,
    shifts_hz: Vec<f64>,
    clusters: Option<Vec<Vec<usize>>>,
    field_axis: qnmr::spin_system::FieldAxis,
}

impl SystemSummary {
    fn new(sys: &SpinSystem) -> Self {
        SystemSummary {
            spins: sys.spins().iter().map(|s| (s.label.clone(), s.gamma)).collect(),
            couplings_hz: sys.couplings().map(|((i, j), hz)| (i, j, hz)).collect(),
            shifts_hz: sys.shifts().to_vec(),
            clusters: sys.clusters().map(<[Vec<usize>]>::to_vec),
            field_axis: sys.field_axis(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?))
}

/// Runs the configured backend and writes `fid.csv`, `populations.csv`,
/// `depths.csv`, `schedule.txt` and the manifest.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<SimulationOutput> {
    cfg.validate()?;
    let sys = load_system(cfg)?;
    let run = simulate(&sys, cfg)?;
    out.write("fid.csv", |w| Ok(write_fid_csv(&run.fid_rows(), w)?))?;
    out.xy("fid.xy.csv", ["time_s", "fid"], run.points.iter().map(|p| (p.time_s, p.fid)))?;
    out.write("populations.csv", |w| run.write_populations(w))?;
    out.write("depths.csv", |w| run.write_depths(w))?;
    out.write("schedule.txt", |w| Ok(run.schedule.write(w)?))?;
    let params = json!({
        "config": cfg,
        "dt_s": cfg.grid.dt(),
        "schedule_seed": cfg.schedule_seed(),
        "initial_states": run.initial_states,
    });
    out.manifest("simulate", params, Some(&sys))?;
    Ok(run)
}

/// Grid spacing implied by sample times at the given grid indices.
pub fn infer_dt(times: &[f64], indices: &[usize]) -> Result<f64> {
    if times.len() != indices.len() {
        return Err(CliError::config(format!(
            "{} samples but the schedule lists {} points",
            times.len(),
            indices.len()
        )));
    }
    let (&last_t, &last_i) = times
        .last()
        .zip(indices.last())
        .ok_or_else(|| CliError::config("no samples"))?;
    if last_i == 0 {
        return Err(CliError::config("cannot infer the grid spacing from a single point at t = 0"));
    }
    let dt = last_t / last_i as f64;
    if !(dt > 0.0) {
        return Err(CliError::config("sample times must increase along the grid"));
    }
    for (&t, &i) in times.iter().zip(indices) {
        if (t - i as f64 * dt).abs() > 1e-9 * last_t.max(1.0) {
            return Err(CliError::config(format!("time {t} is not grid point {i} of spacing {dt}")));
        }
    }
    Ok(dt)
}

/// Reads an FID CSV (and optionally its schedule) into a trace. Without a
/// schedule the rows must form a full uniform grid.
pub fn load_trace(fid: &Path, schedule: Option<&Path>) -> Result<(FidTrace, NusSchedule)> {
    let rows = read_fid_csv(open(fid)?)?;
    if rows.is_empty() {
        return Err(CliError::config(format!("{} has no samples", fid.display())));
    }
    let schedule = match schedule {
        Some(p) => NusSchedule::read(open(p)?)?,
        None => NusSchedule::full(rows.len()),
    };
    let times: Vec<f64> = rows.iter().map(|r| r.time_s).collect();
    let dt = infer_dt(&times, &schedule.indices)?;
    let samples = schedule.indices.iter().zip(&rows).map(|(&i, r)| (i, r.fid_value)).collect();
    Ok((FidTrace::sampled(dt, schedule.n_grid, samples)?, schedule))
}

pub struct ReconstructOutput {
    pub zero_padded: Spectrum,
    pub reconstructed: Spectrum,
    pub peaks_zero_padded: PeakReport,
    pub peaks_reconstructed: PeakReport,
}

/// Zero-padded and IST-S spectra with their peak reports.
pub fn cmd_reconstruct(
    fid: &Path,
    schedule: Option<&Path>,
    ist: &IstOptions,
    peaks: &PeakOptions,
    out: &mut Outputs,
) -> Result<ReconstructOutput> {
    let (trace, sched) = load_trace(fid, schedule)?;
    let zero_padded = zero_padded_spectrum(&trace, &sched)?;
    let reconstructed = ist_s_reconstruct(&trace, &sched, ist)?;
    let peaks_zero_padded = fit_lorentzian_peaks(&zero_padded, peaks);
    let peaks_reconstructed = fit_lorentzian_peaks(&reconstructed, peaks);
    out.spectrum("spectrum_zero_padded", &zero_padded)?;
    out.spectrum("spectrum_ist", &reconstructed)?;
    out.peaks("peaks_zero_padded.csv", &peaks_zero_padded)?;
    out.peaks("peaks_ist.csv", &peaks_reconstructed)?;
    let params = json!({
        "fid": fid,
        "schedule": schedule,
        "n_grid": sched.n_grid,
        "dt_s": trace.dt,
        "ist": ist,
        "peaks": peaks,
    });
    out.manifest("reconstruct", params, None)?;
    Ok(ReconstructOutput {
        zero_padded,
        reconstructed,
        peaks_zero_padded,
        peaks_reconstructed,
    })
}

pub fn cmd_fitpeaks(spectrum: &Path, opts: &PeakOptions, out: &mut Outputs) -> Result<PeakReport> {
    let s = Spectrum::read_csv(open(spectrum)?, SpectrumKind::Reconstructed)?;
    let report = fit_lorentzian_peaks(&s, opts);
    out.peaks("peaks.csv", &report)?;
    out.manifest("fitpeaks", json!({ "spectrum": spectrum, "peaks": opts }), None)?;
    Ok(report)
}

pub fn cmd_schedule(n_grid: usize, budget: usize, alpha: f64, seed: u64, out: &mut Outputs) -> Result<NusSchedule> {
    let s = poisson_gap_schedule(n_grid, budget, alpha, seed)?;
    out.write("schedule.txt", |w| Ok(s.write(w)?))?;
    let params = json!({ "n_grid": n_grid, "budget": budget, "alpha": alpha, "seed": seed });
    out.manifest("schedule", params, None)?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResourcesArgs {
    pub molecule: Option<PathBuf>,
    pub fidelities: Vec<f64>,
    pub depth_min: f64,
    /// Defaults to just below each curve's divergence (or 1e6 for F = 1).
    pub depth_max: Option<f64>,
    pub depth_points: usize,
    pub total_time: f64,
    pub epsilon: f64,
    /// Sample dephasing rate in 1/s.
    pub gamma: f64,
    /// Defaults to clustered when the molecule carries a partition.
    pub layout: Option<TrotterLayout>,
    pub cost_scale: f64,
}

impl Default for ResourcesArgs {
    fn default() -> Self {
        ResourcesArgs {
            molecule: None,
            fidelities: vec![0.99, 0.999, 0.9999],
            depth_min: 1.0,
            depth_max: None,
            depth_points: 200,
            total_time: 6.0,
            epsilon: 0.01,
            gamma: 1.0,
            layout: None,
            cost_scale: 1.0,
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// β bounds and step counts in `resources.json`, one design curve per gate
/// fidelity in `design_F<F>.csv`.
pub fn cmd_resources(args: &ResourcesArgs, out: &mut Outputs) -> Result<Value> {
    if args.fidelities.is_empty() {
        return Err(CliError::config("at least one gate fidelity is required"));
    }
    if let Some(f) = args.fidelities.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(CliError::config(format!("gate fidelity {f} outside (0, 1]")));
    }
    if args.depth_points == 0 || !(args.depth_min > 0.0) {
        return Err(CliError::config("depth grid is empty"));
    }
    let sys = match &args.molecule {
        Some(p) => read_molecule(p)?,
        None => SpinSystem::acetonitrile(),
    };
    let layout = args.layout.unwrap_or(if sys.clusters().is_some() {
        TrotterLayout::Clustered
    } else {
        TrotterLayout::Plain
    });
    let naive = beta_naive(&sys);
    let clustered = beta_clustered(&sys).ok();
    let beta: BetaBound = match layout {
        TrotterLayout::Plain => naive,
        TrotterLayout::Clustered => {
            clustered.ok_or_else(|| CliError::config("clustered layout needs a cluster partition"))?
        }
    };
    let cost = CostModel {
        scale: args.cost_scale,
    };
    let gates_per_step = TrotterPlan::new(&sys, args.total_time, 1, layout, cost)?.gates_per_step as f64;
    let n = sys.n_spins();
    let estimate = ResourceEstimate::new(beta, args.total_time, args.epsilon, args.gamma, n, gates_per_step)?;
    let naive_nmr = qnmr::resources::trotter_steps_nmr(naive.total, args.total_time, args.gamma, n)?;

    let mut curves = Vec::new();
    if beta.total > 0.0 {
        for &f in &args.fidelities {
            let pole = if f < 1.0 { n as f64 / -f.ln() } else { f64::INFINITY };
            let hi = args.depth_max.unwrap_or(if f < 1.0 { pole * (1.0 - 1e-3) } else { 1e6 }).min(pole * (1.0 - 1e-9));
            if hi <= args.depth_min {
                return Err(CliError::config(format!("depth grid is empty for F = {f}")));
            }
            let mut depths = log_grid(args.depth_min, hi, args.depth_points);
            let opt = (f < 1.0).then(|| qnmr::resources::optimal_resolution(beta.total, n, gates_per_step, f)).transpose()?;
            if let Some(o) = opt {
                if o.depth > args.depth_min && o.depth < hi {
                    depths.push(o.depth);
                    depths.sort_by(f64::total_cmp);
                }
            }
            let curve = design_curve(beta.total, n, gates_per_step, f, &depths)?;
            let name = format!("design_F{f}.csv");
            out.write(&name, |w| Ok(curve.write_csv(w)?))?;
            out.xy(&format!("design_F{f}.xy.csv"), ["depth", "linewidth_Hz"], curve.points.iter().copied())?;
            curves.push(json!({ "fidelity": f, "file": name, "optimum": opt }));
        }
    } else {
        eprintln!("commutator bound is zero for the {layout:?} layout; no design curves written");
    }
    let summary = json!({
        "args": args,
        "layout": layout,
        "beta_naive": naive,
        "beta_clustered": clustered,
        "estimate": estimate,
        "steps_nmr_naive": naive_nmr,
        "curves": curves,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    out.write("resources.json", |w| writeln!(w, "{text}").map_err(|e| CliError::io("resources.json", e)))?;
    out.manifest("resources", json!({ "args": args }), Some(&sys))?;
    Ok(summary)
}

pub struct DiagnoseOutput {
    pub series: FidelitySeries,
    pub spectrum: Spectrum,
    pub peaks: PeakReport,
}

/// Bhattacharyya series between two `simulate` runs over the same
/// schedule, and its reconstructed spectrum.
pub fn cmd_diagnose(
    noisy_dir: &Path,
    ideal_dir: &Path,
    ist: &IstOptions,
    peaks: &PeakOptions,
    out: &mut Outputs,
) -> Result<DiagnoseOutput> {
    let noisy = read_populations(open(&noisy_dir.join("populations.csv"))?)?;
    let ideal = read_populations(open(&ideal_dir.join("populations.csv"))?)?;
    if noisy.times != ideal.times || noisy.initial_states != ideal.initial_states {
        return Err(CliError::config("the two runs do not share time points and initial states"));
    }
    let schedule = NusSchedule::read(open(&noisy_dir.join("schedule.txt"))?)?;
    let dt = infer_dt(&noisy.times, &schedule.indices)?;
    let series = FidelitySeries::from_records(&noisy.times, &noisy.readouts, &ideal.readouts, None)?;
    let spectrum = bc_series_spectrum(&series, &schedule, dt, ist)?;
    let report = fit_lorentzian_peaks(&spectrum, peaks);
    out.write("bc_series.csv", |w| Ok(series.write_csv(w)?))?;
    out.xy("bc_series.xy.csv", ["time_s", "bc_mean"], series.points.iter().map(|p| (p.time_s, p.bc_mean)))?;
    out.spectrum("bc_spectrum", &spectrum)?;
    out.peaks("bc_peaks.csv", &report)?;
    let params = json!({ "noisy": noisy_dir, "ideal": ideal_dir, "dt_s": dt, "ist": ist, "peaks": peaks });
    out.manifest("diagnose", params, None)?;
    Ok(DiagnoseOutput {
        series,
        spectrum,
        peaks: report,
    })
}
