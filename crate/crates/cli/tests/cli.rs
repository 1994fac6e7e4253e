use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qnmr::cs_reconstruct::NusSchedule;
use qnmr::resources::ClusteredInstance;
use qnmr::spin_system::{read_molecule, SpinSystem};
use serde_json::Value;
use tempfile::TempDir;

fn qnmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnmr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = qnmr(args);
    assert!(out.status.success(), "qnmr {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn molecule(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../molecules").join(name)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_molecules_match_builtins() {
    let acn = read_molecule(molecule("acetonitrile.mol")).unwrap();
    assert_eq!(acn, SpinSystem::acetonitrile());
    let two = read_molecule(molecule("two_scale.mol")).unwrap();
    let generated = ClusteredInstance::two_scale().generate().unwrap();
    assert_eq!(two.n_spins(), generated.n_spins());
    assert_eq!(two.clusters(), generated.clusters());
    for ((a, ja), (b, jb)) in two.couplings().zip(generated.couplings()) {
        assert_eq!(a, b);
        assert!((ja - jb).abs() < 1e-9);
    }
}

#[test]
fn simulate_writes_outputs_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "--out",
        s(&out),
        "--seed",
        "3",
        "--plot-data",
        "simulate",
        "--molecule",
        s(&molecule("acetonitrile.mol")),
        "--n-grid",
        "512",
        "--total-time",
        "0.75",
        "--budget",
        "40",
    ]);
    for f in ["fid.csv", "populations.csv", "depths.csv", "schedule.txt", "manifest.json", "fid.xy.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let fid = std::fs::read_to_string(out.join("fid.csv")).unwrap();
    assert!(fid.starts_with("time_s,fid_value,n_shots,backend\n"));
    assert_eq!(fid.lines().count(), 41);
    let sched = NusSchedule::read(std::fs::File::open(out.join("schedule.txt")).map(std::io::BufReader::new).unwrap())
        .unwrap();
    assert_eq!((sched.n_grid, sched.len()), (512, 40));

    let m = manifest(&out);
    assert_eq!(m["tool"], "qnmr");
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["parameters"]["config"]["seed"], 3);
    assert_eq!(m["parameters"]["schedule_seed"], 3);
    assert_eq!(m["system"]["couplings_hz"].as_array().unwrap().len(), 3);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "fid.csv"));
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(!text.contains("threads"));
}

#[test]
fn reconstruct_and_diagnose_chain() {
    let tmp = TempDir::new().unwrap();
    let ideal = tmp.path().join("ideal");
    let noisy = tmp.path().join("noisy");
    let common = ["--n-grid", "512", "--total-time", "0.75", "--budget", "48"];
    let mut args = vec!["--out", s(&ideal), "simulate"];
    args.extend(common);
    ok(&args);
    let mut args = vec![
        "--out",
        s(&noisy),
        "simulate",
        "--backend",
        "trotter_noisy",
        "--layout",
        "adaptive",
        "--amp-damping",
        "0.005",
        "--phase-damping",
        "0.035",
    ];
    args.extend(common);
    ok(&args);

    let spectra = tmp.path().join("spectra");
    let out = ok(&[
        "--out",
        s(&spectra),
        "reconstruct",
        "--fid",
        s(&ideal.join("fid.csv")),
        "--schedule",
        s(&ideal.join("schedule.txt")),
    ]);
    for f in ["spectrum_zero_padded.csv", "spectrum_ist.csv", "peaks_zero_padded.csv", "peaks_ist.csv"] {
        assert!(spectra.join(f).is_file(), "{f} missing");
    }
    // Both lines are printed, within the coarser bin of the short window.
    let printed = String::from_utf8(out.stdout).unwrap();
    let freqs: Vec<f64> = printed.lines().map(|l| l.split_whitespace().next().unwrap().parse().unwrap()).collect();
    assert!(freqs.iter().any(|f| (f - 136.2).abs() < 1.0), "{printed}");
    assert!(freqs.iter().any(|f| (f - 272.4).abs() < 1.0), "{printed}");

    let refit = tmp.path().join("refit");
    ok(&["--out", s(&refit), "fitpeaks", "--spectrum", s(&spectra.join("spectrum_ist.csv"))]);
    assert_eq!(
        std::fs::read(refit.join("peaks.csv")).unwrap(),
        std::fs::read(spectra.join("peaks_ist.csv")).unwrap()
    );

    let diag = tmp.path().join("diag");
    ok(&["--out", s(&diag), "diagnose", "--noisy", s(&noisy), "--ideal", s(&ideal)]);
    let series = std::fs::read_to_string(diag.join("bc_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 49);
    for line in series.lines().skip(1) {
        let bc: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(bc > 0.5 && bc <= 1.0 + 1e-12, "{line}");
    }
    assert!(diag.join("bc_spectrum.csv").is_file() && diag.join("bc_peaks.csv").is_file());
}

#[test]
fn schedule_command_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&["--out", s(&a), "--seed", "5", "schedule", "--budget", "102"]);
    ok(&["--out", s(&b), "--seed", "5", "schedule", "--budget", "102"]);
    ok(&["--out", s(&c), "--seed", "6", "schedule", "--budget", "102"]);
    let read = |d: &Path| std::fs::read_to_string(d.join("schedule.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn resources_reports_bounds_and_curves() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("res");
    ok(&[
        "--out",
        s(&out),
        "resources",
        "--molecule",
        s(&molecule("two_scale.mol")),
        "--fidelity",
        "0.999,0.9999",
        "--depth-points",
        "50",
    ]);
    let summary: Value = serde_json::from_slice(&std::fs::read(out.join("resources.json")).unwrap()).unwrap();
    assert_eq!(summary["layout"], "clustered");
    let naive = summary["beta_naive"]["total"].as_f64().unwrap();
    let clustered = summary["beta_clustered"]["total"].as_f64().unwrap();
    assert!(naive > 10.0 * clustered);
    for f in ["0.999", "0.9999"] {
        let text = std::fs::read_to_string(out.join(format!("design_F{f}.csv"))).unwrap();
        assert!(text.starts_with("# beta="));
        assert!(text.contains("# optimum depth="));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 51);
        // The marked optimum is the smallest linewidth on the grid.
        let parsed: Vec<(f64, f64, u8)> = rows
            .iter()
            .map(|r| {
                let v: Vec<&str> = r.split(',').collect();
                (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap())
            })
            .collect();
        let best = parsed.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.2, 1);
        assert_eq!(parsed.iter().filter(|p| p.2 == 1).count(), 1);
    }
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");

    let bad = qnmr(&["--out", s(&out), "simulate", "--budget", "0"]);
    assert_eq!(bad.status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let unknown = qnmr(&["--config", s(&cfg), "--out", s(&out), "simulate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_key"));

    let big = tmp.path().join("big.mol");
    let mut text = String::new();
    for i in 0..13 {
        text.push_str(&format!("spin H{i} 1\n"));
    }
    for i in 0..12 {
        text.push_str(&format!("coupling {i} {} 10\n", i + 1));
    }
    std::fs::write(&big, text).unwrap();
    let limit = qnmr(&["--out", s(&out), "simulate", "--molecule", s(&big), "--n-grid", "8"]);
    assert_eq!(limit.status.code(), Some(4), "{}", String::from_utf8_lossy(&limit.stderr));

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "time_s,fid_value,n_shots,backend\n").unwrap();
    let nothing = qnmr(&["--out", s(&out), "reconstruct", "--fid", s(&empty)]);
    assert_eq!(nothing.status.code(), Some(2));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["acetonitrile_nus.toml", "acetonitrile_noisy.toml"] {
        let cfg = qnmr_cli::config::RunConfig::load(&dir.join(name)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.schedule.budget, Some(102));
    }
}
