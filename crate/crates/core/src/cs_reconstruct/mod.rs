//! Non-uniform sampling, zero-filled transforms, iterative soft thresholding
//! reconstruction and Lorentzian peak fitting.

mod peaks;
mod schedule;

pub use peaks::{fit_lorentzian_peaks, noise_floor, read_peaks_csv, write_peaks_csv, Peak, PeakOptions, PeakReport};
pub use schedule::{poisson_gap_schedule, NusSchedule};

use std::io::{Read, Write};

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, Error, Result};
use crate::linalg::{C64, ZERO};

/// Time-domain samples on a uniform grid, possibly only at some indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FidTrace {
    pub dt: f64,
    pub n_grid: usize,
    /// `(grid index, value)`, sorted by index.
    pub points: Vec<(usize, f64)>,
}

impl FidTrace {
    pub fn full(dt: f64, values: &[f64]) -> Self {
        FidTrace {
            dt,
            n_grid: values.len(),
            points: values.iter().copied().enumerate().collect(),
        }
    }

    pub fn sampled(dt: f64, n_grid: usize, mut points: Vec<(usize, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("duplicate sample index in trace"));
        }
        if points.last().is_some_and(|p| p.0 >= n_grid) {
            return Err(Error::param("trace sample beyond the grid"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("sampling interval must be positive"));
        }
        Ok(FidTrace { dt, n_grid, points })
    }

    /// Values at the schedule's indices.
    fn at(&self, schedule: &NusSchedule) -> Result<Vec<f64>> {
        if schedule.n_grid != self.n_grid {
            return Err(Error::param(format!(
                "schedule grid {} differs from trace grid {}",
                schedule.n_grid, self.n_grid
            )));
        }
        schedule
            .indices
            .iter()
            .map(|&i| {
                self.points
                    .binary_search_by_key(&i, |p| p.0)
                    .map(|k| self.points[k].1)
                    .map_err(|_| Error::param(format!("trace has no sample at grid index {i}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    ZeroPadded,
    Reconstructed,
}

/// `X_k = Σ_n x_n e^{-2πi kn/N}` on bins `f_k = k / (N·dt)`; bins above
/// `N/2` hold the negative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub df: f64,
    pub values: Vec<C64>,
    pub kind: SpectrumKind,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Bin closest to `f` among the nonnegative frequencies.
    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.df).round().max(0.0) as usize).min(self.len() / 2)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["freq_Hz", "re", "im", "magnitude"]).map_err(csv_err)?;
        for (k, z) in self.values.iter().enumerate() {
            w.write_record([
                self.freq(k).to_string(),
                z.re.to_string(),
                z.im.to_string(),
                z.norm().to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, kind: SpectrumKind) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[serde(rename = "freq_Hz")]
            freq: f64,
            re: f64,
            im: f64,
        }
        let rows: Vec<Row> = csv::Reader::from_reader(input)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)?;
        if rows.len() < 2 {
            return Err(Error::param("spectrum needs at least two bins"));
        }
        Ok(Spectrum {
            df: rows[1].freq - rows[0].freq,
            values: rows.iter().map(|r| C64::new(r.re, r.im)).collect(),
            kind,
        })
    }
}

/// Forward and inverse plans for one transform length.
struct Transform {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl Transform {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch = vec![ZERO; forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
        Transform { forward, inverse, scratch }
    }

    fn forward(&mut self, data: &mut [C64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    fn inverse(&mut self, data: &mut [C64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

/// Forward DFT of a complex vector (unnormalized).
pub fn dft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    Transform::new(v.len()).forward(&mut v);
    v
}

/// Inverse DFT with the `1/N` factor.
pub fn idft(x: &[C64]) -> Vec<C64> {
    let mut v = x.to_vec();
    Transform::new(v.len()).inverse(&mut v);
    v
}

/// Zero-filled, mean-removed data on the full grid.
fn zero_filled(trace: &FidTrace, schedule: &NusSchedule) -> Result<Vec<C64>> {
    schedule.validate()?;
    let vals = trace.at(schedule)?;
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let mut y = vec![ZERO; schedule.n_grid];
    for (&i, v) in schedule.indices.iter().zip(&vals) {
        y[i] = C64::new(v - mean, 0.0);
    }
    Ok(y)
}

pub fn zero_padded_spectrum(trace: &FidTrace, schedule: &NusSchedule) -> Result<Spectrum> {
    let y = zero_filled(trace, schedule)?;
    Ok(Spectrum {
        df: 1.0 / (trace.n_grid as f64 * trace.dt),
        values: dft(&y),
        kind: SpectrumKind::ZeroPadded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IstOptions {
    pub iters: usize,
    pub threshold_decay: f64,
    /// Stop once the residual at sampled points falls below this fraction
    /// of the data norm.
    pub tolerance: f64,
    /// Length of the spectral model frame in units of the acquisition window.
    pub extension: usize,
}

impl Default for IstOptions {
    fn default() -> Self {
        IstOptions {
            iters: 5000,
            threshold_decay: 0.998,
            tolerance: 1e-8,
            extension: 4,
        }
    }
}

/// Iterative soft thresholding with a decaying threshold.
///
/// The spectral model lives on a frame `extension` times longer than the
/// acquisition window, so a line that falls between bins of the output grid
/// is still nearly sparse on the model grid. Each iteration adds the
/// transform of the data residual to the model spectrum and soft-thresholds
/// the sum at `decay^k · max|initial spectrum|`. The returned spectrum is
/// the transform of the model signal on the acquisition window with the
/// measured values restored at sampled indices, so it is data-consistent by
/// construction and equals the plain transform under full sampling.
pub fn ist_s_reconstruct(trace: &FidTrace, schedule: &NusSchedule, opts: &IstOptions) -> Result<Spectrum> {
    if !(opts.threshold_decay > 0.0 && opts.threshold_decay < 1.0) {
        return Err(Error::param("threshold decay must lie in (0, 1)"));
    }
    if opts.extension == 0 {
        return Err(Error::param("model frame extension must be at least 1"));
    }
    let y = zero_filled(trace, schedule)?;
    let n = y.len();
    let frame = n * opts.extension;
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let y_norm = norm(&y);
    let mut residual = y.clone();
    residual.resize(frame, ZERO);
    let mut model = vec![ZERO; frame];
    let mut fft = Transform::new(frame);
    let mut spec = residual.clone();
    fft.forward(&mut spec);
    let thr0 = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (mut last, mut growth) = (f64::INFINITY, 0);
    for k in 0..opts.iters {
        let r_norm = norm(&residual);
        if y_norm == 0.0 || r_norm <= opts.tolerance * y_norm {
            break;
        }
        if r_norm > last {
            growth += 1;
            if growth >= 10 {
                return Err(Error::numeric(format!(
                    "reconstruction diverging: residual grew for 10 iterations (at {k}, relative {:e})",
                    r_norm / y_norm
                )));
            }
        } else {
            growth = 0;
        }
        last = r_norm;
        let tau = opts.threshold_decay.powi(k as i32 + 1) * thr0;
        spec.copy_from_slice(&residual);
        fft.forward(&mut spec);
        // The offset bin is left unpenalized: the sample mean only
        // approximates the true static component.
        model[0] += spec[0];
        for (a, s) in model.iter_mut().zip(&spec).skip(1) {
            let z = *a + s;
            let mag = z.norm();
            *a = if mag > tau { z * ((mag - tau) / mag) } else { ZERO };
        }
        spec.copy_from_slice(&model);
        fft.inverse(&mut spec);
        for &i in &schedule.indices {
            residual[i] = y[i] - spec[i];
        }
    }
    let mut window = model;
    fft.inverse(&mut window);
    window.truncate(n);
    for &i in &schedule.indices {
        window[i] = y[i];
    }
    Ok(Spectrum {
        df: 1.0 / (n as f64 * trace.dt),
        values: dft(&window),
        kind: SpectrumKind::Reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine_trace(n: usize, dt: f64, freqs: &[(f64, f64, f64)]) -> FidTrace {
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                freqs.iter().map(|&(f, a, decay)| a * (2.0 * PI * f * t).cos() * (-t * decay).exp()).sum()
            })
            .collect();
        FidTrace::full(dt, &v)
    }

    #[test]
    fn grid_cosine_lands_in_one_bin() {
        let n = 256;
        let dt = 1.0 / 256.0;
        let tr = cosine_trace(n, dt, &[(20.0, 1.0, 0.0)]);
        let s = zero_padded_spectrum(&tr, &NusSchedule::full(n)).unwrap();
        assert!((s.df - 1.0).abs() < 1e-12);
        for (k, z) in s.values.iter().enumerate() {
            if k == 20 || k == n - 20 {
                assert!((z.norm() - 128.0).abs() < 1e-9);
            } else {
                assert!(z.norm() < 1e-9, "bin {k}");
            }
        }
    }

    #[test]
    fn zero_trace_gives_zero_spectrum() {
        let tr = FidTrace::full(0.01, &[0.0; 64]);
        let s = zero_padded_spectrum(&tr, &NusSchedule::full(64)).unwrap();
        assert!(s.values.iter().all(|z| z.norm() == 0.0));
        let r = ist_s_reconstruct(&tr, &NusSchedule::full(64), &IstOptions::default()).unwrap();
        assert!(r.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn missing_samples_rejected() {
        let tr = FidTrace::sampled(0.01, 16, vec![(0, 1.0), (3, 2.0)]).unwrap();
        let sched = NusSchedule { n_grid: 16, indices: vec![0, 2], alpha: 0.5, seed: 0 };
        assert!(zero_padded_spectrum(&tr, &sched).is_err());
    }

    #[test]
    fn full_sampling_reconstruction_is_plain_transform() {
        let tr = cosine_trace(512, 0.004, &[(31.3, 1.0, 2.0), (70.0, 0.4, 1.0)]);
        let full = NusSchedule::full(512);
        let a = zero_padded_spectrum(&tr, &full).unwrap();
        let b = ist_s_reconstruct(&tr, &full, &IstOptions::default()).unwrap();
        let scale = a.magnitudes().into_iter().fold(0.0, f64::max);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn reconstruction_honours_sampled_data() {
        let n = 1024;
        let tr = cosine_trace(n, 0.005, &[(12.1, 1.0, 0.3), (40.7, 0.6, 0.5)]);
        let sched = poisson_gap_schedule(n, 60, 0.5, 5).unwrap();
        let s = ist_s_reconstruct(&tr, &sched, &IstOptions::default()).unwrap();
        let back = idft(&s.values);
        let vals = tr.at(&sched).unwrap();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let scale = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        for (&i, v) in sched.indices.iter().zip(&vals) {
            assert!((back[i].re - (v - mean)).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn parseval() {
        let x: Vec<C64> = (0..300).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos())).collect();
        let e_t: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let e_f: f64 = dft(&x).iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((e_t - e_f).abs() < 1e-10 * e_t);
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let tr = cosine_trace(32, 0.01, &[(10.0, 1.0, 0.0)]);
        let s = zero_padded_spectrum(&tr, &NusSchedule::full(32)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"freq_Hz,re,im,magnitude\n"));
        let back = Spectrum::read_csv(buf.as_slice(), SpectrumKind::ZeroPadded).unwrap();
        assert_eq!(back.values, s.values);
        assert!((back.df - s.df).abs() < 1e-12);
    }
}
