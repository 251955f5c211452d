//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "kind": "black_scholes", "r": 2.0, "sigma": 1.0, "x0": 1.0 },
//!   "schemes": [ { "kind": "euler" }, { "kind": "milstein" } ],
//!   "grid": { "t0": 0.0, "t_end": 1.0, "base_dt": 0.03125 },
//!   "study": { "k": 2, "levels": 6, "replicates": 1000, "metric": "strong_abs", "mode": "truth" },
//!   "seed": 20240601,
//!   "workers": 1
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convergence::{Functional, Metric, Mode, SchemeChoice, StudyConfig};
use crate::error::{config, Result, SimError};
use crate::iterint::experiments::{FourierConfig, MseConfig, PairingConfig, RankingConfig};
use crate::models::{BlackScholes, HestonParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelConfig {
    BlackScholes(BlackScholes),
    Heston(HestonParams),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::BlackScholes(p) => p.validate(),
            Self::Heston(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    pub base_dt: f64,
}

fn one() -> f64 {
    1.0
}

/// A terminal functional with a name used in output file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFunctional {
    pub name: String,
    #[serde(flatten)]
    pub functional: Functional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "two")]
    pub k: usize,
    pub levels: usize,
    pub replicates: usize,
    #[serde(default = "strong")]
    pub metric: Metric,
    #[serde(default = "coupled")]
    pub mode: Mode,
    /// Defaults to the first state coordinate.
    #[serde(default)]
    pub functionals: Vec<NamedFunctional>,
}

fn two() -> usize {
    2
}

fn strong() -> Metric {
    Metric::StrongAbs
}

fn coupled() -> Mode {
    Mode::Coupled
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralsSection {
    pub pairing: Option<PairingConfig>,
    pub ranking: Option<RankingConfig>,
    pub mse: Option<MseConfig>,
    pub fourier: Option<FourierConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub schemes: Vec<SchemeChoice>,
    pub grid: Option<GridConfig>,
    pub study: Option<StudySection>,
    #[serde(default)]
    pub integrals: IntegralsSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_worker")]
    pub workers: usize,
    /// Largest tolerated fraction of divergent replicates per scheme.
    #[serde(default = "default_divergent_fraction")]
    pub max_divergent_fraction: f64,
}

fn one_worker() -> usize {
    1
}

fn default_divergent_fraction() -> f64 {
    0.05
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            SimError::Config(format!(
                "line {} column {}, at `{}`: {}",
                inner.line(),
                inner.column(),
                e.path(),
                inner
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        let m = self.model.as_ref().ok_or_else(|| SimError::Config("missing `model`".into()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn grid(&self) -> Result<GridConfig> {
        self.grid.ok_or_else(|| SimError::Config("missing `grid`".into()))
    }

    pub fn schemes(&self) -> Result<&[SchemeChoice]> {
        if self.schemes.is_empty() {
            return config("`schemes` must list at least one scheme");
        }
        Ok(&self.schemes)
    }

    /// Study settings with an optional functional substituted.
    pub fn study_config(&self, functional: Functional) -> Result<StudyConfig> {
        let s = self.study.as_ref().ok_or_else(|| SimError::Config("missing `study`".into()))?;
        let g = self.grid()?;
        let cfg = StudyConfig {
            t0: g.t0,
            t_end: g.t_end,
            base_dt: g.base_dt,
            k: s.k,
            levels: s.levels,
            replicates: s.replicates,
            metric: s.metric,
            functional,
            mode: s.mode,
            seed: self.seed,
            workers: self.workers.max(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn functionals(&self) -> Vec<NamedFunctional> {
        match &self.study {
            Some(s) if !s.functionals.is_empty() => s.functionals.clone(),
            _ => vec![NamedFunctional {
                name: String::new(),
                functional: Functional::default(),
            }],
        }
    }
}
