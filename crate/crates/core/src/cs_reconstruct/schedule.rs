use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Sorted, unique sample indices on a uniform grid of `n_grid` points.
#[derive(Debug, Clone, PartialEq)]
pub struct NusSchedule {
    pub n_grid: usize,
    pub indices: Vec<usize>,
    pub alpha: f64,
    pub seed: u64,
}

impl NusSchedule {
    /// Every grid point.
    pub fn full(n_grid: usize) -> Self {
        NusSchedule {
            n_grid,
            indices: (0..n_grid).collect(),
            alpha: 0.0,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.first() != Some(&0) {
            return Err(Error::param("schedule must start at index 0"));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("schedule indices must be strictly increasing"));
        }
        if *self.indices.last().unwrap() >= self.n_grid {
            return Err(Error::param("schedule index beyond the grid"));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n_grid {}", self.n_grid)?;
        writeln!(out, "# alpha {}", self.alpha)?;
        writeln!(out, "# seed {}", self.seed)?;
        for i in &self.indices {
            writeln!(out, "{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let (mut n_grid, mut alpha, mut seed) = (None, 0.0, 0);
        let mut indices = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line_no = k + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::parse(line_no, format!("bad {what} in `{line}`"));
            if let Some(header) = line.strip_prefix('#') {
                let mut f = header.split_whitespace();
                match (f.next(), f.next()) {
                    (Some("n_grid"), Some(v)) => n_grid = Some(v.parse().map_err(|_| bad("n_grid"))?),
                    (Some("alpha"), Some(v)) => alpha = v.parse().map_err(|_| bad("alpha"))?,
                    (Some("seed"), Some(v)) => seed = v.parse().map_err(|_| bad("seed"))?,
                    _ => {}
                }
                continue;
            }
            indices.push(line.parse().map_err(|_| bad("index"))?);
        }
        let n_grid = n_grid.ok_or_else(|| Error::parse(1, "missing `# n_grid` header"))?;
        let s = NusSchedule { n_grid, indices, alpha, seed };
        s.validate()?;
        Ok(s)
    }
}

/// One sine-weighted Poisson-gap draw: after each sample at index `m` the
/// next gap is Poisson with mean `λ·sin(απ(m + ½)/N)`.
fn draw(n_grid: usize, lambda: f64, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = 0usize;
    while m < n_grid {
        out.push(m);
        let mean = lambda * (alpha * PI * (m as f64 + 0.5) / n_grid as f64).sin().abs();
        let gap = if mean > 0.0 {
            Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        m += 1 + gap;
    }
    out
}

/// Sine-weighted Poisson-gap schedule with exactly `budget` points.
///
/// For each sub-seed the gap scale `λ` is bisected until one draw hits the
/// budget; if bisection stalls between neighbouring counts the next sub-seed
/// is tried. Deterministic in `(n_grid, budget, alpha, seed)`.
pub fn poisson_gap_schedule(n_grid: usize, budget: usize, alpha: f64, seed: u64) -> Result<NusSchedule> {
    if budget == 0 || budget > n_grid {
        return Err(Error::param(format!("sample budget {budget} must lie in 1..={n_grid}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    let done = |indices: Vec<usize>| NusSchedule { n_grid, indices, alpha, seed };
    if budget == n_grid {
        return Ok(done((0..n_grid).collect()));
    }
    if budget == 1 {
        return Ok(done(vec![0]));
    }
    for sub in 0u64..1000 {
        let stream = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sub;
        let count = |lambda: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            draw(n_grid, lambda, alpha, &mut rng)
        };
        let (mut lo, mut hi) = (0.0, 2.0 * n_grid as f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let s = count(mid);
            match s.len().cmp(&budget) {
                std::cmp::Ordering::Equal => return Ok(done(s)),
                std::cmp::Ordering::Greater => lo = mid,
                std::cmp::Ordering::Less => hi = mid,
            }
        }
    }
    // Unreachable in practice; keep a deterministic fallback.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest: Vec<usize> = (1..n_grid).collect();
    for i in 0..budget - 1 {
        let j = rng.gen_range(i..rest.len());
        rest.swap(i, j);
    }
    let mut indices: Vec<usize> = std::iter::once(0).chain(rest[..budget - 1].iter().copied()).collect();
    indices.sort_unstable();
    Ok(done(indices))
}
