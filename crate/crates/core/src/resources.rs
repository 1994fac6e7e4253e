//! Commutator bounds, Trotter-number formulas and hardware/algorithm design
//! curves for NMR simulation.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_system::SpinSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaVariant {
    Naive,
    Clustered,
}

/// Upper bound on `Σ_μ ‖Σ_{ν>μ} [h_ν, h_μ]‖` in rad²/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBound {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3_tilde: f64,
    pub total: f64,
    pub variant: BetaVariant,
}

impl BetaBound {
    fn new(beta1: f64, beta2: f64, beta3_tilde: f64, variant: BetaVariant) -> Self {
        BetaBound {
            beta1,
            beta2,
            beta3_tilde,
            total: beta1 + beta2 + beta3_tilde,
            variant,
        }
    }
}

/// `Σ_{i≠j} Σ_k |A_ik| |B_kj|` over ordered pairs.
fn path_sum(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for k in 0..n {
        let (mut col_a, mut row_b, mut diag) = (0.0, 0.0, 0.0);
        for i in 0..n {
            col_a += a[i][k].abs();
            row_b += b[k][i].abs();
            diag += a[i][k].abs() * b[k][i].abs();
        }
        s += col_a * row_b - diag;
    }
    s
}

/// `½ Σ_{i≠j} |h_i − h_j| |J_ij|` over ordered pairs.
fn field_sum(j: &[Vec<f64>], h: &[f64]) -> f64 {
    let n = h.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                s += (h[a] - h[b]).abs() * j[a][b].abs();
            }
        }
    }
    0.5 * s
}

fn abs_matrix(m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    m.into_iter().map(|r| r.into_iter().map(f64::abs).collect()).collect()
}

/// Bound for the XX/YY/ZZ-layer product formula with all fields applied as
/// one layer.
pub fn beta_naive(sys: &SpinSystem) -> BetaBound {
    let j = abs_matrix(sys.coupling_matrix_rad());
    let jj = path_sum(&j, &j);
    BetaBound::new(jj, 0.5 * jj, field_sum(&j, &sys.shifts_rad()), BetaVariant::Naive)
}

/// Bound for the cluster-exploiting formula: intra-cluster couplings `V` are
/// handled exactly, so only products involving an inter-cluster coupling
/// `J` remain.
pub fn beta_clustered(sys: &SpinSystem) -> Result<BetaBound> {
    if sys.clusters().is_none() {
        return Err(Error::InvalidSystem("clustered bound needs a cluster partition".into()));
    }
    let full = abs_matrix(sys.coupling_matrix_rad());
    let n = full.len();
    let mut inter = vec![vec![0.0; n]; n];
    let mut intra = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            if sys.cluster_of(a) == sys.cluster_of(b) {
                intra[a][b] = full[a][b];
            } else {
                inter[a][b] = full[a][b];
            }
        }
    }
    Ok(BetaBound::new(
        1.5 * path_sum(&inter, &intra),
        1.5 * path_sum(&inter, &inter),
        field_sum(&inter, &sys.shifts_rad()),
        BetaVariant::Clustered,
    ))
}

/// Looser field bound `Σ_{i≠j} |h_i| |J_ij|` from treating each field term
/// separately.
pub fn beta3_separate(sys: &SpinSystem) -> f64 {
    let j = abs_matrix(sys.coupling_matrix_rad());
    let h = sys.shifts_rad();
    let mut s = 0.0;
    for a in 0..h.len() {
        for b in 0..h.len() {
            if a != b {
                s += h[a].abs() * j[a][b];
            }
        }
    }
    s
}

/// `exp(−βT²/2r)`.
pub fn trotter_fidelity(beta: f64, total_time: f64, steps: u64) -> Result<f64> {
    if steps == 0 {
        return Err(Error::param("Trotter step count must be at least 1"));
    }
    if total_time < 0.0 || beta < 0.0 {
        return Err(Error::param("time and beta must be nonnegative"));
    }
    Ok((-beta * total_time * total_time / (2.0 * steps as f64)).exp())
}

fn ceil_steps(x: f64) -> Result<u64> {
    if !x.is_finite() || x > u64::MAX as f64 {
        return Err(Error::numeric(format!("step count {x} is not representable")));
    }
    // Guard against values like 1.0000000000000002 from round-off.
    Ok(((x - 1e-9 * x.abs()).ceil() as u64).max(1))
}

/// `⌈βT²/2ε⌉`, the step count for a fixed multiplicative precision.
pub fn trotter_steps_precision(beta: f64, total_time: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("precision {eps} outside (0, 1)")));
    }
    ceil_steps(beta * total_time * total_time / (2.0 * eps))
}

/// `⌈βT/(2γN)⌉`, the step count at which algorithmic error matches the
/// sample's own dephasing. Compared with [`trotter_steps_precision`] this
/// is smaller by `N/ε` when `γT ≈ 1`.
pub fn trotter_steps_nmr(beta: f64, total_time: f64, gamma: f64, n_spins: usize) -> Result<u64> {
    if !(gamma > 0.0) || n_spins == 0 {
        return Err(Error::param("dephasing rate and spin count must be positive"));
    }
    ceil_steps(beta * total_time / (2.0 * gamma * n_spins as f64))
}

/// Achievable linewidth against total two-qubit depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCurve {
    pub beta: f64,
    pub n_spins: usize,
    pub gates_per_step: f64,
    pub fidelity: f64,
    /// `(depth, linewidth in Hz)`.
    pub points: Vec<(f64, f64)>,
    /// Closed-form optimum; absent for perfect gates.
    pub optimum: Option<OptimalResolution>,
}

impl DesignCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# beta={} n_spins={} gates_per_step={} fidelity={}",
            self.beta, self.n_spins, self.gates_per_step, self.fidelity
        )?;
        if let Some(o) = &self.optimum {
            writeln!(out, "# optimum depth={} linewidth_Hz={}", o.depth, o.linewidth_hz)?;
        }
        writeln!(out, "depth,linewidth_Hz,is_optimum")?;
        for &(d, f) in &self.points {
            let mark = self.optimum.is_some_and(|o| o.depth == d);
            writeln!(out, "{d},{f},{}", u8::from(mark))?;
        }
        Ok(())
    }
}

fn check_design(beta: f64, n_spins: usize, gates_per_step: f64, fidelity: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta must be positive"));
    }
    if n_spins == 0 || !(gates_per_step > 0.0) {
        return Err(Error::param("spin count and gates per step must be positive"));
    }
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(Error::param(format!("gate fidelity {fidelity} outside (0, 1]")));
    }
    Ok(())
}

/// Linewidth at total depth `D`, from the balance condition taken as an
/// equality with `T = 1/γ` and `D = N_g T/Δt`:
/// `γ² = β N_g / (2D (N − D log(1/F)))`, `Δf = γ/2π`.
pub fn design_linewidth(beta: f64, n_spins: usize, gates_per_step: f64, fidelity: f64, depth: f64) -> Result<f64> {
    check_design(beta, n_spins, gates_per_step, fidelity)?;
    let n = n_spins as f64;
    let l = -fidelity.ln();
    let room = n - depth * l;
    if !(depth > 0.0) || room <= 0.0 {
        return Err(Error::param(format!(
            "depth {depth} outside (0, {}) where the balance has a solution",
            n / l
        )));
    }
    Ok((beta * gates_per_step / (2.0 * depth * room)).sqrt() / (2.0 * PI))
}

pub fn design_curve(beta: f64, n_spins: usize, gates_per_step: f64, fidelity: f64, depths: &[f64]) -> Result<DesignCurve> {
    if depths.is_empty() {
        return Err(Error::param("depth grid is empty"));
    }
    let points = depths
        .iter()
        .map(|&d| Ok((d, design_linewidth(beta, n_spins, gates_per_step, fidelity, d)?)))
        .collect::<Result<_>>()?;
    let optimum = if fidelity < 1.0 {
        Some(optimal_resolution(beta, n_spins, gates_per_step, fidelity)?)
    } else {
        None
    };
    Ok(DesignCurve {
        beta,
        n_spins,
        gates_per_step,
        fidelity,
        points,
        optimum,
    })
}

/// Numerical minimum of the design curve by golden-section search over the
/// admissible depths. Returns `(depth, linewidth)`.
pub fn design_curve_minimum(beta: f64, n_spins: usize, gates_per_step: f64, fidelity: f64) -> Result<(f64, f64)> {
    check_design(beta, n_spins, gates_per_step, fidelity)?;
    if fidelity == 1.0 {
        return Err(Error::param("with perfect gates the linewidth decreases without bound"));
    }
    let upper = n_spins as f64 / -fidelity.ln();
    let f = |d: f64| design_linewidth(beta, n_spins, gates_per_step, fidelity, d).unwrap_or(f64::INFINITY);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (upper * 1e-9, upper * (1.0 - 1e-9));
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-12 * upper {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalResolution {
    pub linewidth_hz: f64,
    pub depth: f64,
}

/// `Δf_opt = √(2 N_g β log(1/F)) / (2πN)` at depth `D_opt = N / (2 log(1/F))`.
pub fn optimal_resolution(beta: f64, n_spins: usize, gates_per_step: f64, fidelity: f64) -> Result<OptimalResolution> {
    check_design(beta, n_spins, gates_per_step, fidelity)?;
    if fidelity == 1.0 {
        return Err(Error::param("gate fidelity must be below 1 for a finite optimum"));
    }
    let l = -fidelity.ln();
    let n = n_spins as f64;
    Ok(OptimalResolution {
        linewidth_hz: (2.0 * gates_per_step * beta * l).sqrt() / (2.0 * PI * n),
        depth: n / (2.0 * l),
    })
}

/// Topologies for the heuristic β-scaling check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// Every pair coupled with strength `J/√N` times a random factor.
    AllToAll,
    /// Cliques of `k + 1` spins (each spin has `k` strong partners) chained
    /// by weak links.
    Clustered { k: usize },
}

/// Random instance of a scaling topology with `n` spins and coupling scale
/// `j_hz`.
pub fn scaling_instance(model: ScalingModel, n: usize, j_hz: f64, seed: u64) -> Result<SpinSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9));
    let mut b = SpinSystem::builder();
    for i in 0..n {
        b = b.spin(format!("H{i}"), 1.0);
    }
    let factor = |rng: &mut ChaCha8Rng| {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        sign * rng.gen_range(0.5..1.5)
    };
    match model {
        ScalingModel::AllToAll => {
            let scale = j_hz / (n as f64).sqrt();
            for i in 0..n {
                for j in i + 1..n {
                    b = b.coupling(i, j, scale * factor(&mut rng));
                }
            }
        }
        ScalingModel::Clustered { k } => {
            if k == 0 {
                return Err(Error::param("cluster degree must be at least 1"));
            }
            let size = k + 1;
            let mut clusters = Vec::new();
            for start in (0..n).step_by(size) {
                let members: Vec<usize> = (start..(start + size).min(n)).collect();
                for (a, &i) in members.iter().enumerate() {
                    for &j in &members[a + 1..] {
                        b = b.coupling(i, j, j_hz * factor(&mut rng));
                    }
                }
                if start > 0 {
                    b = b.coupling(start - 1, start, 0.01 * j_hz * factor(&mut rng));
                }
                clusters.push(members);
            }
            b = b.clusters(clusters);
        }
    }
    b.build()
}

/// Least-squares slope of `log β_naive` against `log N` over `sizes`.
pub fn heuristic_scaling_check(model: ScalingModel, sizes: &[usize], j_hz: f64, seed: u64) -> Result<f64> {
    if sizes.len() < 2 {
        return Err(Error::param("scaling fit needs at least two sizes"));
    }
    let mut pts = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let beta = beta_naive(&scaling_instance(model, n, j_hz, seed)?).total;
        if beta <= 0.0 {
            return Err(Error::numeric(format!("beta vanished at N = {n}")));
        }
        pts.push(((n as f64).ln(), beta.ln()));
    }
    Ok(loglog_slope(&pts))
}

/// Ordinary least-squares slope.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Clusters of strongly coupled spins joined by weak links, standing in for
/// molecules whose full coupling tables are not available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredInstance {
    pub cluster_sizes: Vec<usize>,
    pub intra_hz: f64,
    pub inter_hz: f64,
    /// Weak links between each pair of consecutive clusters.
    pub links: usize,
    pub shift_hz: f64,
    pub seed: u64,
}

impl ClusteredInstance {
    /// Two four-spin clusters, `V = 100 Hz`, `J = 1 Hz`.
    pub fn two_scale() -> Self {
        ClusteredInstance {
            cluster_sizes: vec![4, 4],
            intra_hz: 100.0,
            inter_hz: 1.0,
            links: 2,
            shift_hz: 0.0,
            seed: 0,
        }
    }

    /// Couplings are the nominal value times a random factor in [0.8, 1.2];
    /// shifts are uniform in `±shift_hz`.
    pub fn generate(&self) -> Result<SpinSystem> {
        if self.cluster_sizes.contains(&0) {
            return Err(Error::param("empty cluster"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n: usize = self.cluster_sizes.iter().sum();
        let mut b = SpinSystem::builder();
        for i in 0..n {
            b = b.spin(format!("H{i}"), 1.0);
        }
        let mut clusters = Vec::new();
        let mut start = 0;
        for &size in &self.cluster_sizes {
            let members: Vec<usize> = (start..start + size).collect();
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    b = b.coupling(i, j, self.intra_hz * rng.gen_range(0.8..1.2));
                }
            }
            clusters.push(members);
            start += size;
        }
        for pair in clusters.windows(2) {
            let mut used = Vec::new();
            for _ in 0..self.links {
                let i = pair[0][rng.gen_range(0..pair[0].len())];
                let j = pair[1][rng.gen_range(0..pair[1].len())];
                if !used.contains(&(i, j)) {
                    used.push((i, j));
                    b = b.coupling(i, j, self.inter_hz * rng.gen_range(0.8..1.2));
                }
            }
        }
        if self.shift_hz > 0.0 {
            for i in 0..n {
                b = b.shift(i, rng.gen_range(-self.shift_hz..self.shift_hz));
            }
        }
        b.clusters(clusters).build()
    }
}

/// Summary of the step counts implied by one β bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub beta: BetaBound,
    pub total_time: f64,
    pub steps_precision: u64,
    pub steps_nmr: u64,
    pub gates_per_step: f64,
    pub total_gates_nmr: f64,
}

impl ResourceEstimate {
    pub fn new(beta: BetaBound, total_time: f64, eps: f64, gamma: f64, n_spins: usize, gates_per_step: f64) -> Result<Self> {
        let steps_nmr = trotter_steps_nmr(beta.total, total_time, gamma, n_spins)?;
        Ok(ResourceEstimate {
            beta,
            total_time,
            steps_precision: trotter_steps_precision(beta.total, total_time, eps)?,
            steps_nmr,
            gates_per_step,
            total_gates_nmr: gates_per_step * steps_nmr as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal triple sum over ordered `i ≠ j` and all `k`.
    fn brute(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let n = a.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j {
                        s += a[i][k].abs() * b[k][j].abs();
                    }
                }
            }
        }
        s
    }

    #[test]
    fn path_sum_matches_literal_sum() {
        let sys = ClusteredInstance { shift_hz: 5.0, ..ClusteredInstance::two_scale() }.generate().unwrap();
        let j = sys.coupling_matrix_rad();
        assert!((path_sum(&j, &j) - brute(&j, &j)).abs() < 1e-9 * brute(&j, &j));
        let b = beta_naive(&sys);
        assert!((b.total - (1.5 * brute(&j, &j) + b.beta3_tilde)).abs() < 1e-6 * b.total);
        assert!(b.beta3_tilde <= beta3_separate(&sys));
    }

    #[test]
    fn equal_fields_and_single_cluster() {
        let sys = SpinSystem::acetonitrile();
        assert_eq!(beta_naive(&sys).beta3_tilde, 0.0);
        assert_eq!(beta_clustered(&sys).unwrap().total, 0.0);
        assert!(beta_clustered(&sys.with_clusters(None).unwrap()).is_err());
    }

    #[test]
    fn clustered_without_intra_couplings_equals_naive() {
        let sys = SpinSystem::builder()
            .spin("a", 1.0)
            .spin("b", 1.0)
            .spin("c", 1.0)
            .coupling(0, 1, 3.0)
            .coupling(1, 2, -2.0)
            .shift(2, 4.0)
            .clusters(vec![vec![0], vec![1], vec![2]])
            .build()
            .unwrap();
        let (n, c) = (beta_naive(&sys), beta_clustered(&sys).unwrap());
        assert!((n.total - c.total).abs() < 1e-9 * n.total);
        assert_eq!(c.beta1, 0.0);
    }

    #[test]
    fn two_scale_instance_gains_an_order_of_magnitude() {
        let sys = ClusteredInstance::two_scale().generate().unwrap();
        let ratio = beta_naive(&sys).total / beta_clustered(&sys).unwrap().total;
        assert!(ratio > 10.0, "ratio {ratio}");
    }

    #[test]
    fn formula_arithmetic() {
        assert_eq!(trotter_fidelity(3.0, 0.0, 4).unwrap(), 1.0);
        assert!((trotter_fidelity(2.0, 1.0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(trotter_fidelity(1.0, 1.0, 0).is_err());
        assert_eq!(trotter_steps_precision(1.0, 1.0, 0.5).unwrap(), 1);
        let beta = 4.0 * PI * PI * 100.0;
        assert_eq!(trotter_steps_precision(beta, 6.0, 0.01).unwrap(), (beta * 36.0 / 0.02).ceil() as u64);
        assert_eq!(trotter_steps_nmr(1.0, 1.0, 0.1, 10).unwrap(), 1);
        assert_eq!(trotter_steps_nmr(1e6, 1.0, 1e12, 3).unwrap(), 1);
        // N = 1 and γ = ε/T make the two counts coincide.
        let (b, t, eps) = (50.0, 2.0, 0.05);
        assert_eq!(trotter_steps_nmr(b, t, eps / t, 1).unwrap(), trotter_steps_precision(b, t, eps).unwrap());
        assert!(trotter_steps_precision(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn design_curve_behaviour() {
        let c = design_curve(1e4, 10, 20.0, 1.0, &[1.0, 4.0, 16.0]).unwrap();
        assert!((c.points[0].1 / c.points[1].1 - 2.0).abs() < 1e-12);
        let opt = optimal_resolution(1e4, 10, 20.0, 0.999).unwrap();
        let (d, f) = design_curve_minimum(1e4, 10, 20.0, 0.999).unwrap();
        assert!((f - opt.linewidth_hz).abs() < 1e-6 * opt.linewidth_hz);
        assert!((d - opt.depth).abs() < 1e-3 * opt.depth);
        let pole = 10.0 / -(0.999f64.ln());
        assert!(design_curve(1e4, 10, 20.0, 0.999, &[pole]).is_err());
        assert!(design_linewidth(1e4, 10, 20.0, 0.999, pole * (1.0 - 1e-9)).unwrap() > 1e3 * opt.linewidth_hz);
        assert!(design_curve(1e4, 10, 20.0, 0.999, &[]).is_err());
        let doubled = optimal_resolution(1e4, 10, 40.0, 0.999).unwrap();
        assert!((doubled.linewidth_hz / opt.linewidth_hz - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn design_curve_csv_has_header() {
        let c = design_curve(1.0, 2, 3.0, 1.0, &[1.0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# beta=1 n_spins=2 gates_per_step=3 fidelity=1\ndepth,linewidth_Hz,is_optimum\n1,"));
        assert!(text.ends_with(",0\n"));
        let d_opt = optimal_resolution(1.0, 2, 3.0, 0.99).unwrap().depth;
        let c = design_curve(1.0, 2, 3.0, 0.99, &[1.0, d_opt]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("# optimum depth="));
        assert!(text.ends_with(",1\n"));
    }

    #[test]
    fn single_bond_beta_is_size_independent() {
        let mk = |n: usize| {
            let mut b = SpinSystem::builder();
            for i in 0..n {
                b = b.spin(format!("H{i}"), 1.0);
            }
            beta_naive(&b.coupling(0, 1, 7.0).build().unwrap()).total
        };
        assert_eq!(mk(2), mk(9));
    }
}
