//! Fidelity diagnostics between noisy and ideal readouts.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cs_reconstruct::{ist_s_reconstruct, FidTrace, IstOptions, NusSchedule, Spectrum};
use crate::error::{csv_err, Error, Result};
use crate::simulator::PopulationRecord;

/// Bhattacharyya coefficient `1 − ½Σ(√p − √q)²`, cross-checked against
/// `Σ√(p q)`.
pub fn bhattacharyya(p: &PopulationRecord, q: &PopulationRecord) -> Result<f64> {
    bhattacharyya_dist(&p.distribution(), &q.distribution())
}

pub fn bhattacharyya_dist(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::param(format!(
            "distributions have {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    // Summing in a fixed order of the unordered pair keeps the result
    // exactly symmetric.
    let (mut dist, mut overlap) = (0.0, 0.0);
    for (&a, &b) in p.iter().zip(q) {
        let (sa, sb) = (a.max(0.0).sqrt(), b.max(0.0).sqrt());
        dist += (sa - sb) * (sa - sb);
        overlap += sa * sb;
    }
    let bc = 1.0 - 0.5 * dist;
    // Expanding the square: bc = Σ√(pq) + 1 − (Σp + Σq)/2.
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if (bc - overlap - (1.0 - 0.5 * (sp + sq))).abs() > 1e-12 {
        return Err(Error::numeric(format!("coefficient forms disagree: {bc} vs {overlap}")));
    }
    Ok(bc.clamp(0.0, 1.0))
}

/// `(bc²)^(1/n)`: the per-gate value whose `n`-th power is the squared
/// coefficient.
pub fn squared_bc_per_gate(bc: f64, n_two_qubit_gates: usize) -> Result<f64> {
    if n_two_qubit_gates == 0 {
        return Err(Error::param("per-gate bound needs at least one two-qubit gate"));
    }
    if !(bc > 0.0 && bc <= 1.0) {
        return Err(Error::param(format!("coefficient {bc} outside (0, 1]")));
    }
    Ok((bc * bc).powf(1.0 / n_two_qubit_gates as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub time_s: f64,
    pub bc_mean: f64,
    pub bc_min: f64,
    pub bc_max: f64,
}

/// Coefficient between noisy and ideal readouts per time point, averaged
/// over the initial states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FidelitySeries {
    pub points: Vec<FidelityPoint>,
}

impl FidelitySeries {
    /// `noisy[t][s]` and `ideal[t][s]` are the readouts at time `t` from
    /// initial state `s`. `weights` defaults to uniform.
    pub fn from_records(
        times: &[f64],
        noisy: &[Vec<PopulationRecord>],
        ideal: &[Vec<PopulationRecord>],
        weights: Option<&[f64]>,
    ) -> Result<Self> {
        if noisy.len() != times.len() || ideal.len() != times.len() {
            return Err(Error::param("one readout set per time point is required"));
        }
        let mut points = Vec::with_capacity(times.len());
        for ((&t, a), b) in times.iter().zip(noisy).zip(ideal) {
            if a.len() != b.len() || a.is_empty() {
                return Err(Error::param(format!("mismatched readouts at t = {t}")));
            }
            let uniform = vec![1.0; a.len()];
            let w = weights.unwrap_or(&uniform);
            if w.len() != a.len() {
                return Err(Error::param("one weight per initial state is required"));
            }
            let bcs: Vec<f64> = a.iter().zip(b).map(|(x, y)| bhattacharyya(x, y)).collect::<Result<_>>()?;
            let total: f64 = w.iter().sum();
            points.push(FidelityPoint {
                time_s: t,
                bc_mean: bcs.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total,
                bc_min: bcs.iter().copied().fold(f64::INFINITY, f64::min),
                bc_max: bcs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        Ok(FidelitySeries { points })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.points.is_empty() {
            w.write_record(["time_s", "bc_mean", "bc_min", "bc_max"]).map_err(csv_err)?;
        }
        for p in &self.points {
            w.serialize(p).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let points = csv::Reader::from_reader(input)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)?;
        Ok(FidelitySeries { points })
    }
}

/// Reconstructed spectrum of the mean coefficient. Each point's time must
/// sit on the schedule's grid of spacing `dt`.
pub fn bc_series_spectrum(
    series: &FidelitySeries,
    schedule: &NusSchedule,
    dt: f64,
    opts: &IstOptions,
) -> Result<Spectrum> {
    let mut samples = Vec::with_capacity(series.points.len());
    for p in &series.points {
        let idx = (p.time_s / dt).round();
        if idx < 0.0 || (idx * dt - p.time_s).abs() > 1e-6 * dt {
            return Err(Error::param(format!("time {} is not on the sampling grid", p.time_s)));
        }
        samples.push((idx as usize, p.bc_mean));
    }
    let trace = FidTrace::sampled(dt, schedule.n_grid, samples)?;
    ist_s_reconstruct(&trace, schedule, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let d0 = [1.0, 0.0];
        let d1 = [0.0, 1.0];
        assert_eq!(bhattacharyya_dist(&d0, &d0).unwrap(), 1.0);
        assert_eq!(bhattacharyya_dist(&d0, &d1).unwrap(), 0.0);
        let uniform = [1.0 / 16.0; 16];
        let mut delta = [0.0; 16];
        delta[0] = 1.0;
        assert!((bhattacharyya_dist(&uniform, &delta).unwrap() - 0.25).abs() < 1e-15);
        assert!(bhattacharyya_dist(&d0, &uniform).is_err());
    }

    #[test]
    fn per_gate_bound() {
        assert_eq!(squared_bc_per_gate(1.0, 7).unwrap(), 1.0);
        let v = squared_bc_per_gate(0.8f64.sqrt(), 20).unwrap();
        assert!((v - 0.8f64.powf(0.05)).abs() < 1e-14);
        assert!((v - 0.988_904_8).abs() < 1e-7);
        assert!(squared_bc_per_gate(0.9, 0).is_err());
    }

    #[test]
    fn series_and_csv() {
        let a = PopulationRecord::from_probabilities(vec![0.5, 0.5]).unwrap();
        let b = PopulationRecord::from_probabilities(vec![1.0, 0.0]).unwrap();
        let s = FidelitySeries::from_records(
            &[0.0, 0.5],
            &[vec![a.clone(), b.clone()], vec![b.clone(), b.clone()]],
            &[vec![a.clone(), a.clone()], vec![b.clone(), b.clone()]],
            None,
        )
        .unwrap();
        let half = 0.5f64.sqrt();
        assert!((s.points[0].bc_mean - (1.0 + half) / 2.0).abs() < 1e-12);
        assert!((s.points[0].bc_min - half).abs() < 1e-12);
        assert_eq!(s.points[1].bc_mean, 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"time_s,bc_mean,bc_min,bc_max\n"));
        assert_eq!(FidelitySeries::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn constant_series_has_flat_spectrum() {
        let sched = crate::cs_reconstruct::poisson_gap_schedule(256, 40, 0.5, 1).unwrap();
        let series = FidelitySeries {
            points: sched
                .indices
                .iter()
                .map(|&i| FidelityPoint { time_s: i as f64 * 0.01, bc_mean: 0.93, bc_min: 0.9, bc_max: 0.95 })
                .collect(),
        };
        let s = bc_series_spectrum(&series, &sched, 0.01, &IstOptions::default()).unwrap();
        assert!(s.magnitudes().iter().all(|m| *m < 1e-9));
        let peaks = crate::cs_reconstruct::fit_lorentzian_peaks(&s, &Default::default());
        assert!(peaks.is_empty());
    }
}
