use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qnmr::circuits::TrotterLayout;
use qnmr::simulator::{Backend, BlockNoise};
use qnmr_cli::commands::{self, Outputs, ResourcesArgs};
use qnmr_cli::config::{CircuitLayout, RunConfig, Steps};
use qnmr_cli::error::Result;
use qnmr_cli::pipeline::with_threads;
use serde::de::DeserializeOwned;

/// Quantum simulation of NMR spectra: simulate, reconstruct and analyse.
#[derive(Parser)]
#[command(name = "qnmr", version)]
struct Cli {
    /// TOML run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for shot sampling (and the schedule unless set separately).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write two-column x,y files for plotting.
    #[arg(long, global = true)]
    plot_data: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the FID over a (possibly sparse) time grid.
    Simulate(SimulateArgs),
    /// Zero-padded and IST-S spectra of a simulated FID.
    Reconstruct(ReconstructArgs),
    /// Fit Lorentzian peaks to a spectrum CSV.
    Fitpeaks(FitpeaksArgs),
    /// Generate a Poisson-gap sampling schedule.
    Schedule(ScheduleArgs),
    /// Commutator bounds, step counts and resolution design curves.
    Resources(ResourcesCli),
    /// Compare a noisy run to an ideal run via the Bhattacharyya series.
    Diagnose(DiagnoseArgs),
}

fn parse_word<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_steps(s: &str) -> std::result::Result<Steps, String> {
    if s == "auto" {
        return Ok(Steps::Auto);
    }
    s.parse().map(Steps::Fixed).map_err(|_| format!("expected \"auto\" or a count, got \"{s}\""))
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    molecule: Option<PathBuf>,
    /// exact, trotter_noiseless or trotter_noisy.
    #[arg(long, value_parser = parse_word::<Backend>)]
    backend: Option<Backend>,
    #[arg(long)]
    n_grid: Option<usize>,
    /// Acquisition time in seconds.
    #[arg(long)]
    total_time: Option<f64>,
    /// Number of sampled grid points; omit for the full grid.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    schedule_seed: Option<u64>,
    /// 0 reports exact populations.
    #[arg(long)]
    shots: Option<u64>,
    /// plain, clustered or adaptive.
    #[arg(long, value_parser = parse_word::<CircuitLayout>)]
    layout: Option<CircuitLayout>,
    /// "auto" or a fixed step count.
    #[arg(long, value_parser = parse_steps)]
    steps: Option<Steps>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    cost_scale: Option<f64>,
    /// Pad every circuit to the deepest one.
    #[arg(long, overrides_with = "no_padding")]
    padding: bool,
    #[arg(long)]
    no_padding: bool,
    #[arg(long)]
    amp_damping: Option<f64>,
    #[arg(long)]
    phase_damping: Option<f64>,
    #[arg(long)]
    depol_1q: Option<f64>,
    #[arg(long)]
    depol_2q: Option<f64>,
    /// interleaved, after_block or off.
    #[arg(long, value_parser = parse_word::<BlockNoise>)]
    block_noise: Option<BlockNoise>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// fid.csv from a simulate run.
    #[arg(long)]
    fid: PathBuf,
    /// Schedule of the sampled points; defaults to a full grid.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct FitpeaksArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    max_peaks: Option<usize>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 4096)]
    n_grid: usize,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Args)]
struct ResourcesCli {
    #[arg(long)]
    molecule: Option<PathBuf>,
    /// Gate fidelities, one design curve each.
    #[arg(long, value_delimiter = ',')]
    fidelity: Option<Vec<f64>>,
    #[arg(long)]
    depth_min: Option<f64>,
    #[arg(long)]
    depth_max: Option<f64>,
    #[arg(long)]
    depth_points: Option<usize>,
    #[arg(long)]
    total_time: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sample dephasing rate in 1/s.
    #[arg(long)]
    gamma: Option<f64>,
    /// plain or clustered.
    #[arg(long, value_parser = parse_word::<TrotterLayout>)]
    layout: Option<TrotterLayout>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Output directory of the noisy simulate run.
    #[arg(long)]
    noisy: PathBuf,
    /// Output directory of the ideal run over the same schedule.
    #[arg(long)]
    ideal: PathBuf,
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_simulate(cfg: &mut RunConfig, a: &SimulateArgs) {
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    if a.molecule.is_some() {
        cfg.molecule = a.molecule.clone();
    }
    set!(a.backend => cfg.backend);
    set!(a.n_grid => cfg.grid.n_grid);
    set!(a.total_time => cfg.grid.total_time);
    if a.budget.is_some() {
        cfg.schedule.budget = a.budget;
    }
    set!(a.alpha => cfg.schedule.alpha);
    if a.schedule_seed.is_some() {
        cfg.schedule.seed = a.schedule_seed;
    }
    set!(a.shots => cfg.shots);
    set!(a.layout => cfg.trotter.layout);
    set!(a.steps => cfg.trotter.steps);
    set!(a.epsilon => cfg.trotter.epsilon);
    set!(a.cost_scale => cfg.trotter.cost_scale);
    if a.padding {
        cfg.padding = true;
    }
    if a.no_padding {
        cfg.padding = false;
    }
    set!(a.amp_damping => cfg.noise.amp_damping_2q);
    set!(a.phase_damping => cfg.noise.phase_damping_2q);
    set!(a.depol_1q => cfg.noise.depolarizing_1q);
    set!(a.depol_2q => cfg.noise.depolarizing_2q);
    set!(a.block_noise => cfg.noise.block_noise);
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    let mut out = Outputs::new(&cli.out, cli.plot_data)?;
    match &cli.command {
        Command::Simulate(a) => {
            apply_simulate(&mut cfg, a);
            let run = with_threads(cli.threads, || commands::cmd_simulate(&cfg, &mut out))??;
            eprintln!(
                "simulated {} time points x {} initial states ({})",
                run.points.len(),
                run.initial_states.len(),
                run.backend.as_str()
            );
        }
        Command::Reconstruct(a) => {
            if let Some(n) = a.iterations {
                cfg.ist.iters = n;
            }
            let r = with_threads(cli.threads, || {
                commands::cmd_reconstruct(&a.fid, a.schedule.as_deref(), &cfg.ist, &cfg.peaks, &mut out)
            })??;
            for p in &r.peaks_reconstructed.peaks {
                println!("{:.4} Hz  ± {:.4}", p.f0_hz, p.uncertainty_hz);
            }
        }
        Command::Fitpeaks(a) => {
            if let Some(n) = a.max_peaks {
                cfg.peaks.max_peaks = n;
            }
            let r = commands::cmd_fitpeaks(&a.spectrum, &cfg.peaks, &mut out)?;
            for p in &r.peaks {
                println!("{:.4} Hz  ± {:.4}", p.f0_hz, p.uncertainty_hz);
            }
        }
        Command::Schedule(a) => {
            commands::cmd_schedule(a.n_grid, a.budget, a.alpha, cli.seed.unwrap_or(0), &mut out)?;
        }
        Command::Resources(a) => {
            let mut args = ResourcesArgs {
                molecule: a.molecule.clone().or(cfg.molecule.clone()),
                total_time: cfg.grid.total_time,
                epsilon: cfg.trotter.epsilon,
                cost_scale: cfg.trotter.cost_scale,
                ..ResourcesArgs::default()
            };
            if let Some(f) = &a.fidelity {
                args.fidelities = f.clone();
            }
            args.depth_min = a.depth_min.unwrap_or(args.depth_min);
            args.depth_max = a.depth_max.or(args.depth_max);
            args.depth_points = a.depth_points.unwrap_or(args.depth_points);
            args.total_time = a.total_time.unwrap_or(args.total_time);
            args.epsilon = a.epsilon.unwrap_or(args.epsilon);
            args.gamma = a.gamma.unwrap_or(args.gamma);
            args.layout = a.layout;
            let summary = commands::cmd_resources(&args, &mut out)?;
            println!("{}", serde_json::to_string_pretty(&summary["estimate"])?);
        }
        Command::Diagnose(a) => {
            let r = with_threads(cli.threads, || {
                commands::cmd_diagnose(&a.noisy, &a.ideal, &cfg.ist, &cfg.peaks, &mut out)
            })??;
            for p in &r.peaks.peaks {
                println!("{:.4} Hz  ± {:.4}", p.f0_hz, p.uncertainty_hz);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

