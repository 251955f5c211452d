//! Strong, weak and mean-square convergence studies.
//!
//! Each replicate owns one [`WienerTree`]. The finest grid of a study is
//! materialized from the tree and every coarser grid is its exact block sum,
//! so all levels of a replicate see the same Brownian path. Errors are
//! measured either against an exact solution (truth mode) or between
//! consecutive levels (coupled mode); the rate is the OLS slope of
//! `ln E` on `ln Δ`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result, SimError};
use crate::iterint::DoubleIntegralMethod;
use crate::models::{simulate_heston, HestonParams, HestonScheme, OptionSpec};
use crate::parallel::par_map_indexed;
use crate::schemes::{euler_md, euler_scalar, milstein_md, milstein_scalar, MultiSde, ScalarSde};
use crate::wiener::{coarsen, TimeGrid, WienerSegment, WienerTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `E|f(X) − f(X′)|`
    StrongAbs,
    /// `|E f(X) − E f(X′)|`
    WeakMean,
    /// `E (f(X) − f(X′))²`
    Mse,
    /// `E ‖X − X′‖₂` over the whole state vector.
    L2Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Truth,
    Coupled,
}

/// Scalar quantity extracted from a terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Functional {
    Coordinate { index: usize },
    Payoff { option: OptionSpec, index: usize },
}

impl Default for Functional {
    fn default() -> Self {
        Self::Coordinate { index: 0 }
    }
}

impl Functional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Coordinate { index } => x[index],
            Self::Payoff { option, index } => option.payoff(x[index]),
        }
    }

    fn index(&self) -> usize {
        match *self {
            Self::Coordinate { index } | Self::Payoff { index, .. } => index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub t0: f64,
    pub t_end: f64,
    /// Coarsest step `Δ₁`.
    pub base_dt: f64,
    /// Refinement factor between levels.
    pub k: usize,
    /// Number of levels `R`; level `r` uses `Δ₁ / k^{r−1}`.
    pub levels: usize,
    pub replicates: usize,
    pub metric: Metric,
    pub functional: Functional,
    pub mode: Mode,
    pub seed: u64,
    pub workers: usize,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return config(format!("refinement factor must be >= 2, got {}", self.k));
        }
        if self.levels < 3 {
            return config(format!("need at least 3 levels, got {}", self.levels));
        }
        if self.replicates < 30 {
            return config(format!("need at least 30 replicates, got {}", self.replicates));
        }
        self.base_grid().map(|_| ())
    }

    /// The coarsest grid; `base_dt` must divide the horizon.
    pub fn base_grid(&self) -> Result<TimeGrid> {
        let span = self.t_end - self.t0;
        if !(self.base_dt > 0.0) || !(span > 0.0) {
            return config("need base_dt > 0 and t_end > t0");
        }
        let steps = span / self.base_dt;
        let rounded = steps.round();
        if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return config(format!("base_dt {} does not subdivide [{}, {}]", self.base_dt, self.t0, self.t_end));
        }
        TimeGrid::new(self.t0, self.t_end, rounded as usize)
    }

    /// Grids simulated per replicate: `R` in truth mode, `R + 1` in coupled
    /// mode so that there are `R` consecutive differences.
    pub fn grid_count(&self) -> usize {
        match self.mode {
            Mode::Truth => self.levels,
            Mode::Coupled => self.levels + 1,
        }
    }

    pub fn grid_dts(&self) -> Vec<f64> {
        (0..self.grid_count())
            .map(|r| self.base_dt / (self.k as f64).powi(r as i32))
            .collect()
    }
}

/// A scheme applied to a model, reduced to its terminal state.
pub trait PathSimulator: Send + Sync {
    fn channels(&self) -> usize;
    fn label(&self) -> String;
    fn terminal(&self, seg: &WienerSegment) -> Result<Vec<f64>>;

    /// Exact terminal state on the same path, when the model has one.
    fn exact_terminal(&self, _seg: &WienerSegment) -> Option<Vec<f64>> {
        None
    }
}

/// Resolution of the mixed-integral method at each level: a fixed `p`/`n_K`,
/// or `ceil(c / Δ)` per step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralRule {
    pub method: DoubleIntegralMethod,
    pub per_step: Option<f64>,
}

impl IntegralRule {
    pub fn fixed(method: DoubleIntegralMethod) -> Self {
        Self { method, per_step: None }
    }

    pub fn inverse_step(method: DoubleIntegralMethod, c: f64) -> Self {
        Self {
            method,
            per_step: Some(c),
        }
    }

    /// Method for step `dt`. Subdivision counts are rounded up to a power of
    /// `factor` so they stay on the segment's refinement tree.
    pub fn resolve(&self, dt: f64, factor: usize) -> Result<DoubleIntegralMethod> {
        let mut n = match self.per_step {
            Some(c) if c > 0.0 => (c / dt - 1e-9).ceil().max(1.0) as usize,
            Some(c) => return config(format!("resolution constant must be > 0, got {c}")),
            None => self.method.resolution(),
        };
        if n == 0 {
            return config("resolution must be >= 1");
        }
        if self.method.needs_subdivision() {
            let mut p = 1usize;
            while p < n {
                p *= factor;
            }
            n = p;
        }
        Ok(self.method.with_resolution(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SchemeChoice {
    Euler,
    Milstein,
    #[serde(rename = "milstein_1d")]
    Milstein1d,
    #[serde(rename = "milstein_2d")]
    Milstein2d { rule: IntegralRule },
}

impl SchemeChoice {
    pub fn label(&self) -> String {
        match self {
            Self::Euler => "euler".into(),
            Self::Milstein => "milstein".into(),
            Self::Milstein1d => "milstein_1d".into(),
            Self::Milstein2d { rule } => format!("milstein_2d_{}", rule.method.label()),
        }
    }
}

fn tree_factor(seg: &WienerSegment) -> usize {
    seg.link().map_or(2, |l| l.tree.factor(l.level))
}

/// A [`ScalarSde`] under Euler or Milstein.
pub struct ScalarSimulator<S> {
    pub sde: S,
    pub x0: f64,
    pub scheme: SchemeChoice,
}

impl<S: ScalarSde> ScalarSimulator<S> {
    pub fn new(sde: S, x0: f64, scheme: SchemeChoice) -> Result<Self> {
        if !matches!(scheme, SchemeChoice::Euler | SchemeChoice::Milstein) {
            return config(format!("scalar models support euler and milstein, not {}", scheme.label()));
        }
        Ok(Self { sde, x0, scheme })
    }
}

impl<S: ScalarSde> PathSimulator for ScalarSimulator<S> {
    fn channels(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        self.scheme.label()
    }

    fn terminal(&self, seg: &WienerSegment) -> Result<Vec<f64>> {
        let path = match self.scheme {
            SchemeChoice::Euler => euler_scalar(&self.sde, self.x0, seg)?,
            _ => milstein_scalar(&self.sde, self.x0, seg)?,
        };
        Ok(path.terminal().to_vec())
    }

    fn exact_terminal(&self, seg: &WienerSegment) -> Option<Vec<f64>> {
        let g = seg.grid();
        self.sde
            .exact_solution(g.t_end() - g.t0(), seg.total(0), self.x0)
            .map(|x| vec![x])
    }
}

/// A [`MultiSde`] under Euler or the generic Milstein scheme.
pub struct MultiSimulator<S> {
    pub sde: S,
    pub x0: Vec<f64>,
    pub scheme: SchemeChoice,
}

impl<S: MultiSde> PathSimulator for MultiSimulator<S> {
    fn channels(&self) -> usize {
        self.sde.noise_dim()
    }

    fn label(&self) -> String {
        self.scheme.label()
    }

    fn terminal(&self, seg: &WienerSegment) -> Result<Vec<f64>> {
        let path = match self.scheme {
            SchemeChoice::Euler => euler_md(&self.sde, &self.x0, seg)?,
            SchemeChoice::Milstein | SchemeChoice::Milstein1d => milstein_md(&self.sde, &self.x0, seg, None)?,
            SchemeChoice::Milstein2d { rule } => {
                let m = rule.resolve(seg.grid().dt(), tree_factor(seg))?;
                milstein_md(&self.sde, &self.x0, seg, Some(&m))?
            }
        };
        Ok(path.terminal().to_vec())
    }
}

/// The three Heston discretizations, terminal state `(S_T, v_T)`.
pub struct HestonSimulator {
    pub params: HestonParams,
    pub scheme: SchemeChoice,
}

impl HestonSimulator {
    pub fn new(params: HestonParams, scheme: SchemeChoice) -> Result<Self> {
        params.validate()?;
        if scheme == SchemeChoice::Milstein {
            return config("Heston schemes are euler, milstein_1d and milstein_2d");
        }
        Ok(Self { params, scheme })
    }
}

impl PathSimulator for HestonSimulator {
    fn channels(&self) -> usize {
        2
    }

    fn label(&self) -> String {
        self.scheme.label()
    }

    fn terminal(&self, seg: &WienerSegment) -> Result<Vec<f64>> {
        let scheme = match self.scheme {
            SchemeChoice::Euler | SchemeChoice::Milstein => HestonScheme::Euler,
            SchemeChoice::Milstein1d => HestonScheme::Milstein1d,
            SchemeChoice::Milstein2d { rule } => {
                HestonScheme::Milstein2d(rule.resolve(seg.grid().dt(), tree_factor(seg))?)
            }
        };
        Ok(simulate_heston(&self.params, seg, &scheme)?.terminal().to_vec())
    }
}

/// Terminal states of every replicate on every grid of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSamples {
    /// Step sizes, coarsest first.
    pub dts: Vec<f64>,
    /// `terminals[m][r]`; `None` for a replicate that diverged on any grid.
    pub terminals: Vec<Option<Vec<Vec<f64>>>>,
    /// Exact terminal state per replicate, truth mode only.
    pub exact: Vec<Option<Vec<f64>>>,
}

impl LevelSamples {
    pub fn divergent(&self) -> usize {
        self.terminals.iter().filter(|t| t.is_none()).count()
    }
}

/// Grids of one replicate, coarsest first; coarser grids are block sums of
/// the finest.
pub fn replicate_segments(cfg: &StudyConfig, channels: usize, replicate: u64) -> Result<Vec<WienerSegment>> {
    let tree = Arc::new(WienerTree::uniform(cfg.seed, replicate, channels, cfg.base_grid()?, cfg.k)?);
    let mut segs = vec![tree.segment(cfg.grid_count() - 1)];
    for _ in 1..cfg.grid_count() {
        let next = coarsen(segs.last().expect("non-empty"), cfg.k)?;
        segs.push(next);
    }
    segs.reverse();
    Ok(segs)
}

/// Runs `sim` on all grids of all replicates.
pub fn simulate_levels(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<LevelSamples> {
    cfg.validate()?;
    let truth = cfg.mode == Mode::Truth;
    let per_rep = par_map_indexed(cfg.workers, cfg.replicates, |m| -> Result<_> {
        let segs = replicate_segments(cfg, sim.channels(), m as u64)?;
        let exact = if truth {
            let e = sim.exact_terminal(segs.last().expect("non-empty"));
            if e.is_none() {
                return config(format!("{}: truth mode needs an exact solution", sim.label()));
            }
            e
        } else {
            None
        };
        let mut terms = Vec::with_capacity(segs.len());
        for seg in &segs {
            match sim.terminal(seg) {
                Ok(x) => terms.push(x),
                Err(SimError::Divergence { .. }) => return Ok((None, exact)),
                Err(e) => return Err(e),
            }
        }
        Ok((Some(terms), exact))
    })?;
    let mut terminals = Vec::with_capacity(cfg.replicates);
    let mut exact = Vec::with_capacity(cfg.replicates);
    for r in per_rep {
        let (t, e) = r?;
        terminals.push(t);
        exact.push(e);
    }
    Ok(LevelSamples {
        dts: cfg.grid_dts(),
        terminals,
        exact,
    })
}

fn metric_error(metric: Metric, functional: &Functional, pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(SimError::DegenerateData("every replicate diverged".into()));
    }
    let n = pairs.len() as f64;
    let f = |x: &[f64]| functional.eval(x);
    Ok(match metric {
        Metric::StrongAbs => pairs.iter().fold(0.0, |s, (a, b)| s + (f(a) - f(b)).abs()) / n,
        Metric::Mse => pairs.iter().fold(0.0, |s, (a, b)| s + (f(a) - f(b)).powi(2)) / n,
        Metric::WeakMean => {
            let ma = pairs.iter().fold(0.0, |s, (a, _)| s + f(a)) / n;
            let mb = pairs.iter().fold(0.0, |s, (_, b)| s + f(b)) / n;
            (ma - mb).abs()
        }
        Metric::L2Vector => {
            let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0, |s, (x, y)| s + (x - y).powi(2)).sqrt();
            pairs.iter().fold(0.0, |s, (a, b)| s + norm(a, b)) / n
        }
    })
}

/// `(Δ_r, Ê_r)` against the exact solution, for every grid.
pub fn errors_vs_truth(samples: &LevelSamples, metric: Metric, functional: &Functional) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(samples.dts.len());
    for (r, &dt) in samples.dts.iter().enumerate() {
        let mut pairs = Vec::new();
        for (t, e) in samples.terminals.iter().zip(&samples.exact) {
            match (t, e) {
                (Some(t), Some(e)) => pairs.push((e.as_slice(), t[r].as_slice())),
                (Some(_), None) => return config("truth mode needs an exact solution"),
                _ => {}
            }
        }
        out.push((dt, metric_error(metric, functional, &pairs)?));
    }
    Ok(out)
}

/// `(Δ_r, Ê_r)` between grid `r` and grid `r + 1`.
pub fn errors_coupled(samples: &LevelSamples, metric: Metric, functional: &Functional) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(samples.dts.len().saturating_sub(1));
    for r in 0..samples.dts.len().saturating_sub(1) {
        let pairs: Vec<_> = samples
            .terminals
            .iter()
            .flatten()
            .map(|t| (t[r].as_slice(), t[r + 1].as_slice()))
            .collect();
        out.push((samples.dts[r], metric_error(metric, functional, &pairs)?));
    }
    Ok(out)
}

/// Least-squares line through `(ln Δ, ln Ê)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(SimError::DegenerateData(format!("need >= 3 levels, got {}", points.len())));
    }
    if let Some(&(d, e)) = points.iter().find(|&&(d, e)| !(d > 0.0 && e > 0.0 && d.is_finite() && e.is_finite())) {
        return Err(SimError::DegenerateData(format!("non-positive point (delta={d}, error={e})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(SimError::DegenerateData("all step sizes are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r2 })
}

/// Per-level errors and the fitted rate for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: RateFit,
    pub divergent: usize,
    /// Errors strictly decrease as `Δ` shrinks. Advisory only.
    pub monotone: bool,
}

impl RateReport {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, divergent: usize) -> Result<Self> {
        let fit = fit_rate(&points)?;
        let monotone = points.windows(2).all(|w| w[1].1 < w[0].1);
        Ok(Self {
            label: label.into(),
            points,
            fit,
            divergent,
            monotone,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.fit.slope
    }

    pub fn log_c(&self) -> f64 {
        self.fit.intercept
    }

    pub fn write_errors_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_points_csv(&self.points, w)
    }

    pub fn write_fit_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slope,intercept,r2,divergent_count")?;
        writeln!(
            w,
            "{},{},{},{}",
            crate::fmt_f64(self.fit.slope),
            crate::fmt_f64(self.fit.intercept),
            crate::fmt_f64(self.fit.r2),
            self.divergent
        )
    }
}

pub fn write_points_csv<W: Write>(points: &[(f64, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "delta,error")?;
    for (d, e) in points {
        writeln!(w, "{},{}", crate::fmt_f64(*d), crate::fmt_f64(*e))?;
    }
    Ok(())
}

/// Per-level errors for the configured metric and mode.
pub fn level_errors(samples: &LevelSamples, cfg: &StudyConfig) -> Result<Vec<(f64, f64)>> {
    if cfg.metric != Metric::L2Vector {
        if let Some(t) = samples.terminals.iter().flatten().next() {
            if cfg.functional.index() >= t[0].len() {
                return config(format!("functional reads coordinate {} of a {}-dimensional state", cfg.functional.index(), t[0].len()));
            }
        }
    }
    match cfg.mode {
        Mode::Truth => errors_vs_truth(samples, cfg.metric, &cfg.functional),
        Mode::Coupled => errors_coupled(samples, cfg.metric, &cfg.functional),
    }
}

/// Full study: simulate, measure and fit.
pub fn run_study(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<RateReport> {
    let samples = simulate_levels(sim, cfg)?;
    let points = level_errors(&samples, cfg)?;
    RateReport::new(sim.label(), points, samples.divergent())
}

pub fn error_vs_truth(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<RateReport> {
    run_study(sim, &StudyConfig { mode: Mode::Truth, ..*cfg })
}

pub fn error_coupled_strong(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<RateReport> {
    run_study(
        sim,
        &StudyConfig {
            mode: Mode::Coupled,
            metric: Metric::StrongAbs,
            ..*cfg
        },
    )
}

pub fn error_coupled_weak(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<RateReport> {
    run_study(
        sim,
        &StudyConfig {
            mode: Mode::Coupled,
            metric: Metric::WeakMean,
            ..*cfg
        },
    )
}

pub fn error_coupled_mse(sim: &dyn PathSimulator, cfg: &StudyConfig) -> Result<RateReport> {
    run_study(
        sim,
        &StudyConfig {
            mode: Mode::Coupled,
            metric: Metric::Mse,
            ..*cfg
        },
    )
}
