//! Command implementations behind the `itosim` binary.
//!
//! Each command reads a [`RunConfig`], runs on the library and writes CSV
//! files into an output directory. Commands return the paths they wrote.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

pub use config::RunConfig;
use config::ModelConfig;

use crate::convergence::{
    level_errors, simulate_levels, HestonSimulator, PathSimulator, RateReport, ScalarSimulator, SchemeChoice,
};
use crate::error::SimError;
use crate::iterint::experiments::{
    fourier_experiment, mse_experiment, pairing_experiment, ranking_experiment, write_fourier_csv, write_mse_csv,
    write_pairing_csv, write_ranking_csv,
};
use crate::models::{simulate_heston, HestonScheme};
use crate::schemes::{euler_scalar, milstein_scalar, PathResult};
use crate::wiener::{TimeGrid, WienerTree};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{scheme}: {divergent} of {replicates} replicates diverged")]
    TooManyDivergent {
        scheme: String,
        divergent: usize,
        replicates: usize,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Sim(SimError::Config(_)) | Self::Sim(SimError::GridMismatch(_)) => 2,
            Self::Sim(SimError::Divergence { .. }) | Self::TooManyDivergent { .. } => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn create(dir: &Path, name: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((path, BufWriter::new(file)))
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CliResult<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Builds the simulator for one scheme of the configured model.
pub fn simulator(model: &ModelConfig, scheme: SchemeChoice) -> crate::Result<Box<dyn PathSimulator>> {
    Ok(match model {
        ModelConfig::BlackScholes(p) => Box::new(ScalarSimulator::new(*p, p.x0, scheme)?),
        ModelConfig::Heston(p) => Box::new(HestonSimulator::new(*p, scheme)?),
    })
}

fn write_path_csv(path: &PathResult, w: &mut impl Write) -> std::io::Result<()> {
    let d = path.states[0].len();
    let header: Vec<String> = (1..=d).map(|i| format!("state_{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (n, row) in path.states.iter().enumerate() {
        let cols: Vec<String> = row.iter().map(|&x| crate::fmt_f64(x)).collect();
        writeln!(w, "{},{}", crate::fmt_f64(path.grid.node(n)), cols.join(","))?;
    }
    Ok(())
}

/// One path per scheme, all driven by the same Brownian path
/// (replicate 0 of the configured seed), on the `grid.base_dt` grid.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let model = cfg.model()?;
    let g = cfg.grid()?;
    let steps = ((g.t_end - g.t0) / g.base_dt).round().max(1.0) as usize;
    let grid = TimeGrid::new(g.t0, g.t_end, steps)?;
    let channels = match model {
        ModelConfig::BlackScholes(_) => 1,
        ModelConfig::Heston(_) => 2,
    };
    let tree = Arc::new(WienerTree::uniform(cfg.seed, 0, channels, grid, 2)?);
    let seg = tree.root();
    let mut written = Vec::new();
    for scheme in cfg.schemes()? {
        let path = match (model, scheme) {
            (ModelConfig::BlackScholes(p), SchemeChoice::Euler) => euler_scalar(p, p.x0, &seg)?,
            (ModelConfig::BlackScholes(p), SchemeChoice::Milstein) => milstein_scalar(p, p.x0, &seg)?,
            (ModelConfig::Heston(p), s) => {
                let hs = match s {
                    SchemeChoice::Euler => HestonScheme::Euler,
                    SchemeChoice::Milstein1d => HestonScheme::Milstein1d,
                    SchemeChoice::Milstein2d { rule } => HestonScheme::Milstein2d(rule.resolve(grid.dt(), 2)?),
                    SchemeChoice::Milstein => {
                        return Err(SimError::Config("Heston schemes are euler, milstein_1d and milstein_2d".into()).into())
                    }
                };
                let path = simulate_heston(p, &seg, &hs)?;
                if !path.clamped_steps.is_empty() {
                    eprintln!("{}: variance clamped on {} of {} steps", s.label(), path.clamped_steps.len(), steps);
                }
                path
            }
            (_, s) => {
                return Err(SimError::Config(format!("scheme {} is not available for this model", s.label())).into())
            }
        };
        written.push(write_file(out, &format!("simulate_{}.csv", scheme.label()), |w| {
            write_path_csv(&path, w)
        })?);
    }
    Ok(written)
}

/// Convergence study per scheme and functional: `<name>_errors.csv`,
/// `<name>_fit.csv` and a combined `summary.csv`.
pub fn cmd_converge(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let model = cfg.model()?;
    let functionals = cfg.functionals();
    let base = cfg.study_config(functionals[0].functional)?;
    let mut written = Vec::new();
    let mut reports = Vec::new();
    for &scheme in cfg.schemes()? {
        let sim = simulator(model, scheme)?;
        let samples = simulate_levels(sim.as_ref(), &base)?;
        let divergent = samples.divergent();
        if divergent as f64 > cfg.max_divergent_fraction * base.replicates as f64 {
            return Err(CliError::TooManyDivergent {
                scheme: scheme.label(),
                divergent,
                replicates: base.replicates,
            });
        }
        for nf in &functionals {
            let study = crate::convergence::StudyConfig {
                functional: nf.functional,
                ..base
            };
            let name = if nf.name.is_empty() {
                scheme.label()
            } else {
                format!("{}_{}", scheme.label(), nf.name)
            };
            let points = level_errors(&samples, &study)?;
            written.push(write_file(out, &format!("{name}_errors.csv"), |w| {
                crate::convergence::write_points_csv(&points, w)
            })?);
            let report = RateReport::new(name.clone(), points, divergent)?;
            written.push(write_file(out, &format!("{name}_fit.csv"), |w| report.write_fit_csv(w))?);
            reports.push(report);
        }
    }
    written.push(write_file(out, "summary.csv", |w| {
        writeln!(w, "scheme,gamma,logC,r2,divergent")?;
        for r in &reports {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.label,
                crate::fmt_f64(r.gamma()),
                crate::fmt_f64(r.log_c()),
                crate::fmt_f64(r.fit.r2),
                r.divergent
            )?;
        }
        Ok(())
    })?);
    Ok(written)
}

/// Runs whichever integral experiments the config enables.
pub fn cmd_integrals(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let i = &cfg.integrals;
    if i.pairing.is_none() && i.ranking.is_none() && i.mse.is_none() && i.fourier.is_none() {
        return Err(SimError::Config("`integrals` enables no experiment".into()).into());
    }
    let workers = cfg.workers.max(1);
    let mut written = Vec::new();
    if let Some(p) = &i.pairing {
        let rows = pairing_experiment(p, cfg.seed, workers)?;
        written.push(write_file(out, "pairing.csv", |w| write_pairing_csv(&rows, w))?);
    }
    if let Some(r) = &i.ranking {
        let rows = ranking_experiment(r, cfg.seed, workers)?;
        written.push(write_file(out, "ranking.csv", |w| write_ranking_csv(&rows, w))?);
    }
    if let Some(m) = &i.mse {
        let rows = mse_experiment(m, cfg.seed, workers)?;
        written.push(write_file(out, "mse.csv", |w| write_mse_csv(&rows, w))?);
    }
    if let Some(f) = &i.fourier {
        let rows = fourier_experiment(f, cfg.seed, workers)?;
        written.push(write_file(out, "fourier.csv", |w| write_fourier_csv(&rows, w))?);
    }
    Ok(written)
}
