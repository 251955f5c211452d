//! Monte Carlo experiments on the mixed-integral approximations.
//!
//! Every path is one [`WienerTree`] replicate whose steps are split in a
//! single bridge refinement into the finest sub-increments needed; coarser
//! subdivisions are block sums of those, so all methods and resolutions see
//! the same Brownian path.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    em_ic0, em_kloeden, levy_fourier_with, milstein_l0, rho_p, subdivision_i21, DoubleIntegralMethod,
    FourierDraws,
};
use crate::error::{config, Result};
use crate::parallel::par_map_indexed;
use crate::rng::{GaussianSource, NormalStream, SeedPath, AUX_CHANNEL_BASE};
use crate::wiener::{TimeGrid, WienerTree};

/// Sums consecutive blocks of `fine` down to `n` values.
pub fn block_sums(fine: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 || !fine.len().is_multiple_of(n) {
        return config(format!("{} sub-increments do not split into {n} blocks", fine.len()));
    }
    let w = fine.len() / n;
    Ok(fine.chunks(w).map(|c| c.iter().fold(0.0, |a, &b| a + b)).collect())
}

/// Sub-increments at the finest resolution for chosen steps of one path.
struct PathSample {
    /// `fine[c][i]` are the sub-increments of channel `c` over `steps[i]`.
    fine: Vec<Vec<Vec<f64>>>,
    /// `W^c` at the start of each requested step.
    w_start: Vec<Vec<f64>>,
    dw: Vec<Vec<f64>>,
}

fn sample_path(seed: u64, path: u64, grid: TimeGrid, finest: usize, steps: &[usize]) -> Result<PathSample> {
    let tree = Arc::new(WienerTree::new(seed, path, 2, grid, vec![finest.max(2)])?);
    let root = tree.root();
    let mut out = PathSample {
        fine: vec![Vec::new(), Vec::new()],
        w_start: vec![Vec::new(), Vec::new()],
        dw: vec![Vec::new(), Vec::new()],
    };
    for c in 0..2 {
        let cum = root.cumulative(c);
        for &n in steps {
            let v = root.increment(c, n);
            let fine = if finest == 1 { vec![v] } else { tree.descend(c, 0, n as u64, v, 1) };
            out.fine[c].push(fine);
            out.w_start[c].push(cum[n]);
            out.dw[c].push(v);
        }
    }
    Ok(out)
}

fn check_power_of_two(n: usize, what: &str) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return config(format!("{what} must be a power of two, got {n}"));
    }
    Ok(())
}

/// Pairing-identity experiment: mean `|ΔW¹ΔW² − (Î_(2,1) + Î_(1,2))|` per
/// interval and subdivision count, for the Kloeden and zero starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub dt: f64,
    pub intervals: usize,
    pub paths: usize,
    /// Subdivisions `n_K = 2^k` for `k = 1..=max_power`.
    pub max_power: u32,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            dt: 0.0625,
            intervals: 5,
            paths: 5000,
            max_power: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingRow {
    pub method: &'static str,
    pub interval: usize,
    pub n_k: usize,
    pub mean_abs_error: f64,
}

pub fn pairing_experiment(cfg: &PairingConfig, seed: u64, workers: usize) -> Result<Vec<PairingRow>> {
    if cfg.intervals == 0 || cfg.paths == 0 || cfg.max_power == 0 {
        return config("pairing experiment needs intervals, paths and max_power >= 1");
    }
    let grid = TimeGrid::new(0.0, cfg.dt * cfg.intervals as f64, cfg.intervals)?;
    let finest = 1usize << cfg.max_power;
    let steps: Vec<usize> = (0..cfg.intervals).collect();
    let methods = ["em_kloeden", "em_ic0"];
    let powers = cfg.max_power as usize;
    // errors[(m * intervals + n) * powers + (k - 1)]
    let per_path = par_map_indexed(workers, cfg.paths, |p| -> Result<Vec<f64>> {
        let s = sample_path(seed, p as u64, grid, finest, &steps)?;
        let mut errs = vec![0.0; methods.len() * cfg.intervals * powers];
        for n in 0..cfg.intervals {
            let product = s.dw[0][n] * s.dw[1][n];
            for k in 1..=powers {
                let sub1 = block_sums(&s.fine[0][n], 1 << k)?;
                let sub2 = block_sums(&s.fine[1][n], 1 << k)?;
                let kl = em_kloeden(&sub1, &sub2, s.w_start[1][n])? + em_kloeden(&sub2, &sub1, s.w_start[0][n])?;
                let ic = em_ic0(&sub1, &sub2)? + em_ic0(&sub2, &sub1)?;
                errs[n * powers + k - 1] = (product - kl).abs();
                errs[(cfg.intervals + n) * powers + k - 1] = (product - ic).abs();
            }
        }
        Ok(errs)
    })?;
    let sums = sum_rows(per_path, methods.len() * cfg.intervals * powers)?;
    let mut rows = Vec::new();
    for (m, name) in methods.iter().enumerate() {
        for n in 0..cfg.intervals {
            for k in 1..=powers {
                rows.push(PairingRow {
                    method: name,
                    interval: n,
                    n_k: 1 << k,
                    mean_abs_error: sums[(m * cfg.intervals + n) * powers + k - 1] / cfg.paths as f64,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_pairing_csv<W: Write>(rows: &[PairingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,interval,n_k,mean_abs_error")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.method, r.interval, r.n_k, crate::fmt_f64(r.mean_abs_error))?;
    }
    Ok(())
}

fn sum_rows(per_path: Vec<Result<Vec<f64>>>, width: usize) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; width];
    for row in per_path {
        for (s, v) in sums.iter_mut().zip(row?) {
            *s += v;
        }
    }
    Ok(sums)
}

/// Method-ranking experiment: mean `|Î_(2,1) − I_(2,1)|` on the last
/// interval of an `intervals`-step path, at `δ_k = Δ/2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub dt: f64,
    pub intervals: usize,
    pub paths: usize,
    pub max_power: u32,
    /// Oracle resolution relative to the finest `δ_k`.
    pub oracle_factor: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 32.0,
            intervals: 32,
            paths: 2000,
            max_power: 5,
            oracle_factor: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub method: &'static str,
    pub k: u32,
    pub n_k: usize,
    pub mean_abs_error: f64,
}

pub const RANKING_METHODS: [&str; 4] = ["levy_fourier", "em_kloeden", "em_ic0", "milstein_l0"];

pub fn ranking_experiment(cfg: &RankingConfig, seed: u64, workers: usize) -> Result<Vec<RankingRow>> {
    if cfg.intervals == 0 || cfg.paths == 0 || cfg.max_power == 0 {
        return config("ranking experiment needs intervals, paths and max_power >= 1");
    }
    check_power_of_two(cfg.oracle_factor, "oracle_factor")?;
    let grid = TimeGrid::new(0.0, cfg.dt * cfg.intervals as f64, cfg.intervals)?;
    let finest = (1usize << cfg.max_power) * cfg.oracle_factor;
    let last = cfg.intervals - 1;
    let powers = cfg.max_power as usize;
    let per_path = par_map_indexed(workers, cfg.paths, |p| -> Result<Vec<f64>> {
        let s = sample_path(seed, p as u64, grid, finest, &[last])?;
        let (f1, f2) = (&s.fine[0][0], &s.fine[1][0]);
        let truth = milstein_l0(f1, f2)?;
        let sq = cfg.dt.sqrt();
        let xi = (s.dw[0][0] / sq, s.dw[1][0] / sq);
        let mut errs = vec![0.0; RANKING_METHODS.len() * powers];
        for k in 1..=powers {
            let n_k = 1usize << k;
            let sub1 = block_sums(f1, n_k)?;
            let sub2 = block_sums(f2, n_k)?;
            let aux = SeedPath::root(seed, p as u64)
                .with_channel(AUX_CHANNEL_BASE)
                .with_level(k as u32)
                .with_node(last as u64);
            let mut stream = NormalStream::at(&aux, 2 * (2 * n_k + 1));
            let draws = FourierDraws::draw(n_k, &mut stream);
            let estimates = [
                levy_fourier_with(xi, cfg.dt, n_k, &draws)?.i21,
                subdivision_i21(&DoubleIntegralMethod::EmKloeden { n_k }, &sub1, &sub2, s.w_start[1][0])?,
                em_ic0(&sub1, &sub2)?,
                milstein_l0(&sub1, &sub2)?,
            ];
            for (m, e) in estimates.iter().enumerate() {
                errs[m * powers + k - 1] = (e - truth).abs();
            }
        }
        Ok(errs)
    })?;
    let sums = sum_rows(per_path, RANKING_METHODS.len() * powers)?;
    let mut rows = Vec::new();
    for (m, name) in RANKING_METHODS.iter().enumerate() {
        for k in 1..=powers {
            rows.push(RankingRow {
                method: name,
                k: k as u32,
                n_k: 1 << k,
                mean_abs_error: sums[m * powers + k - 1] / cfg.paths as f64,
            });
        }
    }
    Ok(rows)
}

pub fn write_ranking_csv<W: Write>(rows: &[RankingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,k,n_k,mean_abs_error")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.method, r.k, r.n_k, crate::fmt_f64(r.mean_abs_error))?;
    }
    Ok(())
}

/// Mean-square error of the zero-start Euler and Milstein subdivisions
/// against a fine Milstein oracle over one step `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseConfig {
    pub dt: f64,
    pub paths: usize,
    pub subdivisions: Vec<usize>,
    pub oracle_subdivisions: usize,
}

impl Default for MseConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 16.0,
            paths: 10_000,
            subdivisions: vec![4, 8, 16, 32, 64, 128],
            oracle_subdivisions: 16_384,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub method: &'static str,
    pub n_k: usize,
    pub mse: f64,
    /// `mse / (Δ δ)` with `δ = Δ / n_K`.
    pub normalized: f64,
}

pub fn mse_experiment(cfg: &MseConfig, seed: u64, workers: usize) -> Result<Vec<MseRow>> {
    if cfg.paths == 0 || cfg.subdivisions.is_empty() {
        return config("mse experiment needs paths and subdivisions");
    }
    check_power_of_two(cfg.oracle_subdivisions, "oracle_subdivisions")?;
    for &n in &cfg.subdivisions {
        check_power_of_two(n, "subdivision count")?;
        if n * 64 > cfg.oracle_subdivisions {
            return config(format!("oracle must be at least 64x finer than n_K = {n}"));
        }
    }
    let grid = TimeGrid::new(0.0, cfg.dt, 1)?;
    let width = 2 * cfg.subdivisions.len();
    let per_path = par_map_indexed(workers, cfg.paths, |p| -> Result<Vec<f64>> {
        let s = sample_path(seed, p as u64, grid, cfg.oracle_subdivisions, &[0])?;
        let (f1, f2) = (&s.fine[0][0], &s.fine[1][0]);
        let truth = milstein_l0(f1, f2)?;
        let mut errs = Vec::with_capacity(width);
        for &n in &cfg.subdivisions {
            let sub1 = block_sums(f1, n)?;
            let sub2 = block_sums(f2, n)?;
            errs.push((em_ic0(&sub1, &sub2)? - truth).powi(2));
            errs.push((milstein_l0(&sub1, &sub2)? - truth).powi(2));
        }
        Ok(errs)
    })?;
    let sums = sum_rows(per_path, width)?;
    let mut rows = Vec::new();
    for (m, name) in ["em_ic0", "milstein_l0"].iter().enumerate() {
        for (i, &n) in cfg.subdivisions.iter().enumerate() {
            let mse = sums[2 * i + m] / cfg.paths as f64;
            rows.push(MseRow {
                method: name,
                n_k: n,
                mse,
                normalized: mse / (cfg.dt * cfg.dt / n as f64),
            });
        }
    }
    Ok(rows)
}

pub fn write_mse_csv<W: Write>(rows: &[MseRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,n_k,mse,normalized")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.method,
            r.n_k,
            crate::fmt_f64(r.mse),
            crate::fmt_f64(r.normalized)
        )?;
    }
    Ok(())
}

/// Truncation error of the Lévy–Fourier series: `I^p` against a `P`-term
/// expansion that shares its coefficient draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    pub dt: f64,
    pub paths: usize,
    pub truncations: Vec<usize>,
    pub reference_terms: usize,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 16.0,
            paths: 4000,
            truncations: vec![4, 8, 16, 32, 64],
            reference_terms: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierRow {
    pub p: usize,
    pub mse: f64,
    /// Closed-form `E[(I^p − I^P)²]` for the shared-draw coupling.
    pub expected: f64,
}

/// `Δ² [ (3/2π²) Σ_{p<r<=P} 1/r² + 2(√ρ_p − √ρ_P)² ]`.
pub fn fourier_expected_mse(dt: f64, p: usize, reference: usize) -> f64 {
    let tail: f64 = (p + 1..=reference).map(|r| 1.0 / (r as f64 * r as f64)).sum();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    dt * dt * (1.5 / pi2 * tail + 2.0 * (rho_p(p).sqrt() - rho_p(reference).sqrt()).powi(2))
}

pub fn fourier_experiment(cfg: &FourierConfig, seed: u64, workers: usize) -> Result<Vec<FourierRow>> {
    if cfg.paths == 0 || cfg.truncations.is_empty() {
        return config("fourier experiment needs paths and truncations");
    }
    if let Some(&p) = cfg.truncations.iter().find(|&&p| p == 0 || p >= cfg.reference_terms) {
        return config(format!("truncation {p} must lie in [1, reference_terms)"));
    }
    let per_path = par_map_indexed(workers, cfg.paths, |p| -> Result<Vec<f64>> {
        let s = SeedPath::root(seed, p as u64).with_channel(AUX_CHANNEL_BASE);
        let mut stream = NormalStream::at(&s, 2 + 2 * (2 * cfg.reference_terms + 1));
        let xi = (stream.standard_normal(), stream.standard_normal());
        let draws = FourierDraws::draw(cfg.reference_terms, &mut stream);
        let reference = levy_fourier_with(xi, cfg.dt, cfg.reference_terms, &draws)?.i12;
        cfg.truncations
            .iter()
            .map(|&q| Ok((levy_fourier_with(xi, cfg.dt, q, &draws)?.i12 - reference).powi(2)))
            .collect()
    })?;
    let sums = sum_rows(per_path, cfg.truncations.len())?;
    Ok(cfg
        .truncations
        .iter()
        .zip(sums)
        .map(|(&p, s)| FourierRow {
            p,
            mse: s / cfg.paths as f64,
            expected: fourier_expected_mse(cfg.dt, p, cfg.reference_terms),
        })
        .collect())
}

pub fn write_fourier_csv<W: Write>(rows: &[FourierRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "p,mse,expected_mse")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.p, crate::fmt_f64(r.mse), crate::fmt_f64(r.expected))?;
    }
    Ok(())
}
