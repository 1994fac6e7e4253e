//! Sampling schedules, reconstruction, peak fitting and overlap metrics on
//! synthetic signals with known content.

use std::f64::consts::PI;

use qnmr::cs_reconstruct::{
    fit_lorentzian_peaks, ist_s_reconstruct, noise_floor, poisson_gap_schedule, zero_padded_spectrum, FidTrace,
    IstOptions, NusSchedule, PeakOptions,
};
use qnmr::metrics::{bc_series_spectrum, bhattacharyya_dist, squared_bc_per_gate, FidelityPoint, FidelitySeries};

#[test]
fn poisson_gap_density_profile() {
    let s = poisson_gap_schedule(4096, 102, 0.5, 0).unwrap();
    assert_eq!(s.len(), 102);
    s.validate().unwrap();
    let early = s.indices.iter().filter(|&&i| i < 1024).count();
    let late = s.indices.iter().filter(|&&i| i >= 3072).count();
    assert!(early > 2 * late, "early {early}, late {late}");

    // With α = 1 the gaps also shrink towards the end of the grid.
    let both = poisson_gap_schedule(4096, 102, 1.0, 0).unwrap();
    let mid = both.indices.iter().filter(|&&i| (1536..2560).contains(&i)).count();
    let tail = both.indices.iter().filter(|&&i| i >= 3584).count();
    let head = both.indices.iter().filter(|&&i| i < 512).count();
    assert!(head > mid / 2 && tail > mid / 2, "head {head}, mid {mid}, tail {tail}");

    assert_eq!(poisson_gap_schedule(64, 64, 0.5, 3).unwrap().indices, (0..64).collect::<Vec<_>>());
    assert!(poisson_gap_schedule(64, 0, 0.5, 3).is_err());
}

#[test]
fn grid_cosine_is_one_bin() {
    let n = 256;
    let values: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / n as f64).cos()).collect();
    let s = zero_padded_spectrum(&FidTrace::full(1e-3, &values), &NusSchedule::full(n)).unwrap();
    let m = s.magnitudes();
    for (k, v) in m.iter().enumerate() {
        if k == 10 || k == n - 10 {
            assert!((v - n as f64 / 2.0).abs() < 1e-9);
        } else {
            assert!(*v < 1e-9, "bin {k}: {v}");
        }
    }
    let zeros = zero_padded_spectrum(&FidTrace::full(1e-3, &vec![0.0; n]), &NusSchedule::full(n)).unwrap();
    assert!(zeros.magnitudes().iter().all(|&v| v == 0.0));
}

#[test]
fn full_sampling_reconstruction_is_the_plain_transform() {
    let n = 512;
    let values: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).cos() * (-0.004 * i as f64).exp()).collect();
    let trace = FidTrace::full(1e-3, &values);
    let sched = NusSchedule::full(n);
    let zp = zero_padded_spectrum(&trace, &sched).unwrap();
    let ist = ist_s_reconstruct(&trace, &sched, &IstOptions::default()).unwrap();
    for (a, b) in zp.values.iter().zip(&ist.values) {
        assert!((a - b).norm() < 1e-8);
    }
}

#[test]
fn sparse_lorentzians_recovered() {
    let (n, dt) = (2048, 1e-3);
    let df = 1.0 / (n as f64 * dt);
    let lines = [(61.3, 1.0, 0.6), (144.8, 0.7, 0.4), (301.1, 0.5, 0.8)];
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            lines.iter().map(|&(f, a, g)| a * (2.0 * PI * f * t).cos() * (-g * t).exp()).sum()
        })
        .collect();
    let sched = poisson_gap_schedule(n, n / 20, 0.5, 4).unwrap();
    let samples = sched.indices.iter().map(|&i| (i, values[i])).collect();
    let trace = FidTrace::sampled(dt, n, samples).unwrap();
    let rec = ist_s_reconstruct(&trace, &sched, &IstOptions::default()).unwrap();
    let peaks = fit_lorentzian_peaks(&rec, &PeakOptions::default());
    for &(f, _, _) in &lines {
        assert!(
            peaks.peaks.iter().any(|p| (p.f0_hz - f).abs() <= df),
            "{f} Hz not found in {:?}",
            peaks.peaks.iter().map(|p| p.f0_hz).collect::<Vec<_>>()
        );
    }
    let zp = zero_padded_spectrum(&trace, &sched).unwrap();
    let freqs: Vec<f64> = lines.iter().map(|l| l.0).collect();
    let rel = |s: &qnmr::cs_reconstruct::Spectrum| {
        let top = s.magnitudes()[1..n / 2].iter().copied().fold(0.0, f64::max);
        noise_floor(s, &freqs, 20) / top
    };
    assert!(rel(&zp) > 3.0 * rel(&rec));
}

#[test]
fn overlap_closed_forms() {
    let uniform = vec![1.0 / 16.0; 16];
    let mut delta = vec![0.0; 16];
    delta[0] = 1.0;
    assert!((bhattacharyya_dist(&uniform, &delta).unwrap() - 0.25).abs() < 1e-15);
    let mut other = vec![0.0; 16];
    other[1] = 1.0;
    assert_eq!(bhattacharyya_dist(&delta, &other).unwrap(), 0.0);
    assert!(bhattacharyya_dist(&delta, &uniform[..4]).is_err());

    assert!((squared_bc_per_gate(0.8f64.sqrt(), 20).unwrap() - 0.8f64.powf(0.05)).abs() < 1e-15);
    assert!((squared_bc_per_gate(0.8f64.sqrt(), 20).unwrap() - 0.98890).abs() < 1e-4);
    assert_eq!(squared_bc_per_gate(1.0, 7).unwrap(), 1.0);
}

#[test]
fn constant_series_has_no_lines() {
    let n = 256;
    let dt = 1e-3;
    let sched = poisson_gap_schedule(n, 40, 0.5, 1).unwrap();
    let series = FidelitySeries {
        points: sched
            .indices
            .iter()
            .map(|&i| FidelityPoint { time_s: i as f64 * dt, bc_mean: 0.97, bc_min: 0.97, bc_max: 0.97 })
            .collect(),
    };
    let s = bc_series_spectrum(&series, &sched, dt, &IstOptions::default()).unwrap();
    assert!(fit_lorentzian_peaks(&s, &PeakOptions::default()).is_empty());
}
