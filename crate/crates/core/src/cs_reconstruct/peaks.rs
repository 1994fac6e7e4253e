use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Spectrum;
use crate::error::{csv_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakOptions {
    pub max_peaks: usize,
    /// Detection threshold as a multiple of the median magnitude.
    pub median_factor: f64,
    /// Detection threshold as a fraction of the tallest bin.
    pub relative_to_max: f64,
    /// Half-width of the fit window, in bins. Weaker maxima inside an
    /// accepted peak's window are treated as its side lobes.
    pub window_bins: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            max_peaks: 8,
            median_factor: 5.0,
            relative_to_max: 0.05,
            window_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(rename = "f0_Hz")]
    pub f0_hz: f64,
    pub amplitude: f64,
    #[serde(rename = "hwhm_Hz")]
    pub hwhm_hz: f64,
    #[serde(rename = "uncertainty_Hz")]
    pub uncertainty_hz: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
}

impl PeakReport {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

pub fn write_peaks_csv<W: Write>(report: &PeakReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if report.peaks.is_empty() {
        w.write_record(["f0_Hz", "amplitude", "hwhm_Hz", "uncertainty_Hz", "converged"])
            .map_err(csv_err)?;
    }
    for p in &report.peaks {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_peaks_csv<R: Read>(input: R) -> Result<PeakReport> {
    let peaks = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    Ok(PeakReport { peaks })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Largest magnitude among positive-frequency bins farther than
/// `window_bins` from every frequency in `exclude_hz`.
pub fn noise_floor(s: &Spectrum, exclude_hz: &[f64], window_bins: usize) -> f64 {
    let mags = s.magnitudes();
    let centers: Vec<usize> = exclude_hz.iter().map(|&f| s.bin_of(f)).collect();
    (1..=s.len() / 2)
        .filter(|&k| centers.iter().all(|&c| k.abs_diff(c) > window_bins))
        .map(|k| mags[k])
        .fold(0.0, f64::max)
}

/// `A (w/2)² / ((f − f0)² + (w/2)²) + b` written with the half-width `hw`.
fn lorentzian(p: &[f64; 4], f: f64) -> f64 {
    let [a, f0, hw, b] = *p;
    let hw2 = hw * hw;
    a * hw2 / ((f - f0) * (f - f0) + hw2) + b
}

/// Derivative-free simplex minimization. Returns the best point, its value
/// and whether the simplex collapsed before the iteration limit.
fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(f: F, start: [f64; 4], step: [f64; 4], max_iter: usize) -> ([f64; 4], f64, bool) {
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, f(&start)));
    for d in 0..4 {
        let mut x = start;
        x[d] += step[d];
        simplex.push((x, f(&x)));
    }
    let lerp = |a: &[f64; 4], b: &[f64; 4], t: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[4].1;
        let size = (1..5)
            .map(|k| (0..4).map(|i| ((simplex[k].0[i] - simplex[0].0[i]) / step[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-9 {
            return (simplex[0].0, simplex[0].1, true);
        }
        let centroid: [f64; 4] = std::array::from_fn(|i| simplex[..4].iter().map(|s| s.0[i]).sum::<f64>() / 4.0);
        let xw = simplex[4].0;
        let xr = lerp(&centroid, &xw, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &xw, -2.0);
            let fe = f(&xe);
            simplex[4] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let x = lerp(&centroid, &xr, 0.5);
                (x, f(&x))
            } else {
                let x = lerp(&centroid, &xw, 0.5);
                (x, f(&x))
            };
            if fc < worst.min(fr) {
                simplex[4] = (xc, fc);
            } else {
                let x0 = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&x0, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, false)
}

/// Detects local maxima of the positive-frequency magnitude spectrum and
/// fits each with a Lorentzian under an ℓ1 loss. Peaks come back sorted by
/// frequency; a flat spectrum yields an empty report.
pub fn fit_lorentzian_peaks(s: &Spectrum, opts: &PeakOptions) -> PeakReport {
    let mags = s.magnitudes();
    let half = s.len() / 2;
    if half < 2 || mags.iter().any(|m| !m.is_finite()) {
        return PeakReport::default();
    }
    let positive = &mags[1..=half];
    let top = positive.iter().copied().fold(0.0, f64::max);
    let threshold = (opts.median_factor * median(positive)).max(opts.relative_to_max * top);
    if top <= 0.0 {
        return PeakReport::default();
    }
    let mut candidates: Vec<usize> = (1..half)
        .filter(|&k| mags[k] > threshold && mags[k] > mags[k - 1] && mags[k] >= mags[k + 1])
        .collect();
    candidates.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for k in candidates {
        if accepted.len() == opts.max_peaks {
            break;
        }
        if accepted.iter().all(|&a| a.abs_diff(k) > opts.window_bins) {
            accepted.push(k);
        }
    }
    accepted.sort_unstable();

    let df = s.df;
    let peaks = accepted
        .into_iter()
        .map(|k0| {
            let lo = k0.saturating_sub(opts.window_bins).max(1);
            let hi = (k0 + opts.window_bins).min(half);
            let pts: Vec<(f64, f64)> = (lo..=hi).map(|k| (s.freq(k), mags[k])).collect();
            let b0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let a0 = mags[k0] - b0;
            let loss = |p: &[f64; 4]| pts.iter().map(|&(f, m)| (lorentzian(p, f) - m).abs()).sum::<f64>();
            let step = [0.1 * a0.max(1e-300), 0.5 * df, 0.5 * df, 0.1 * a0.max(1e-300)];
            let (mut best, mut val, mut converged) = nelder_mead(loss, [a0, s.freq(k0), df, b0], step, 4000);
            // A restart from the optimum guards against premature collapse.
            for _ in 0..2 {
                let (p, v, c) = nelder_mead(loss, best, step, 4000);
                let improved = v < val * (1.0 - 1e-9);
                best = p;
                val = v;
                converged = c;
                if !improved {
                    break;
                }
            }
            let hwhm = best[2].abs();
            Peak {
                f0_hz: best[1],
                amplitude: best[0],
                hwhm_hz: hwhm,
                uncertainty_hz: hwhm.max(0.5 * df),
                converged,
            }
        })
        .collect();
    PeakReport { peaks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs_reconstruct::SpectrumKind;
    use crate::linalg::C64;

    fn synthetic(df: f64, n: usize, lines: &[(f64, f64, f64)]) -> Spectrum {
        let values = (0..n)
            .map(|k| {
                let f = k as f64 * df;
                let v: f64 = lines.iter().map(|&(a, f0, hw)| lorentzian(&[a, f0, hw, 0.0], f)).sum();
                C64::new(v + 0.01, 0.0)
            })
            .collect();
        Spectrum { df, values, kind: SpectrumKind::Reconstructed }
    }

    #[test]
    fn recovers_off_grid_center() {
        let df = 0.25;
        let s = synthetic(df, 2048, &[(10.0, 100.37, 0.6), (4.0, 151.1, 0.3)]);
        let rep = fit_lorentzian_peaks(&s, &PeakOptions::default());
        assert_eq!(rep.len(), 2);
        assert!((rep.peaks[0].f0_hz - 100.37).abs() < 0.1 * df);
        assert!((rep.peaks[0].hwhm_hz - 0.6).abs() < 0.05);
        assert!((rep.peaks[1].f0_hz - 151.1).abs() < 0.1 * df);
        assert!(rep.peaks.iter().all(|p| p.converged && p.uncertainty_hz >= 0.5 * df));
    }

    #[test]
    fn flat_spectrum_has_no_peaks() {
        let s = Spectrum { df: 1.0, values: vec![C64::new(1.0, 0.0); 256], kind: SpectrumKind::ZeroPadded };
        assert!(fit_lorentzian_peaks(&s, &PeakOptions::default()).is_empty());
        let z = Spectrum { df: 1.0, values: vec![C64::new(0.0, 0.0); 256], kind: SpectrumKind::ZeroPadded };
        assert!(fit_lorentzian_peaks(&z, &PeakOptions::default()).is_empty());
    }

    #[test]
    fn floor_skips_peak_windows() {
        let s = synthetic(1.0, 512, &[(10.0, 100.0, 0.5)]);
        let with = noise_floor(&s, &[], 20);
        let without = noise_floor(&s, &[100.0], 20);
        assert!(with > 10.0 && without < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let rep = PeakReport {
            peaks: vec![Peak { f0_hz: 136.2, amplitude: 3.0, hwhm_hz: 0.05, uncertainty_hz: 0.083, converged: true }],
        };
        let mut buf = Vec::new();
        write_peaks_csv(&rep, &mut buf).unwrap();
        assert!(buf.starts_with(b"f0_Hz,amplitude,hwhm_Hz,uncertainty_Hz,converged\n"));
        assert_eq!(read_peaks_csv(buf.as_slice()).unwrap(), rep);
    }
}
