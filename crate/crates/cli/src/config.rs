//! Run configuration: TOML file contents, validated before any computation.

use std::path::{Path, PathBuf};

use qnmr::cs_reconstruct::{IstOptions, PeakOptions};
use qnmr::simulator::{Backend, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Number of points on the uniform time grid.
    pub n_grid: usize,
    /// Acquisition window in seconds.
    pub total_time: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_grid: 4096,
            total_time: 6.0,
        }
    }
}

impl GridConfig {
    pub fn dt(&self) -> f64 {
        self.total_time / self.n_grid as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Sampled points; absent means the full grid.
    pub budget: Option<usize>,
    pub alpha: f64,
    /// Defaults to the master seed.
    pub seed: Option<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            budget: None,
            alpha: 0.5,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitLayout {
    Plain,
    Clustered,
    /// One exact block per time point with a depth that tracks the
    /// recurrences of the dynamics.
    Adaptive,
}

/// `steps = "auto"` or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steps {
    Auto,
    Fixed(usize),
}

impl Serialize for Steps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Steps::Auto => s.serialize_str("auto"),
            Steps::Fixed(r) => s.serialize_u64(*r as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Steps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(r) => Ok(Steps::Fixed(r)),
            Raw::Word(w) if w == "auto" => Ok(Steps::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "steps must be \"auto\" or a count, got \"{w}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotterConfig {
    pub layout: CircuitLayout,
    /// Steps per time point. `auto` picks `max(1, ⌈βt²/2ε⌉)` from the
    /// layout's commutator bound.
    pub steps: Steps,
    pub epsilon: f64,
    /// Largest automatic step count accepted before giving up.
    pub max_steps: usize,
    /// Multiplier on the block cost model.
    pub cost_scale: f64,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        TrotterConfig {
            layout: CircuitLayout::Clustered,
            steps: Steps::Auto,
            epsilon: 0.01,
            max_steps: 100_000,
            cost_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Molecule file; the built-in acetonitrile methyl group when absent.
    pub molecule: Option<PathBuf>,
    pub grid: GridConfig,
    pub schedule: ScheduleConfig,
    pub backend: Backend,
    pub noise: NoiseModel,
    pub trotter: TrotterConfig,
    /// Pad every circuit to the deepest circuit of the run. No effect on
    /// the exact backend.
    pub padding: bool,
    /// Shots per (time point, initial state); 0 reads exact populations.
    pub shots: u64,
    pub seed: u64,
    pub ist: IstOptions,
    pub peaks: PeakOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            molecule: None,
            grid: GridConfig::default(),
            schedule: ScheduleConfig::default(),
            backend: Backend::Exact,
            noise: NoiseModel::noiseless(),
            trotter: TrotterConfig::default(),
            padding: false,
            shots: 0,
            seed: 0,
            ist: IstOptions::default(),
            peaks: PeakOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn schedule_seed(&self) -> u64 {
        self.schedule.seed.unwrap_or(self.seed)
    }

    /// Range and consistency checks that need no spin system.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(path) = &self.molecule {
            if !path.is_file() {
                return bad(format!("molecule file {} does not exist", path.display()));
            }
        }
        if self.grid.n_grid < 2 {
            return bad(format!("grid.n_grid = {} must be at least 2", self.grid.n_grid));
        }
        if !(self.grid.total_time > 0.0 && self.grid.total_time.is_finite()) {
            return bad(format!("grid.total_time = {} must be positive", self.grid.total_time));
        }
        if let Some(b) = self.schedule.budget {
            if b == 0 || b > self.grid.n_grid {
                return bad(format!("schedule.budget = {b} must be in 1..={}", self.grid.n_grid));
            }
        }
        if !(self.schedule.alpha > 0.0 && self.schedule.alpha.is_finite()) {
            return bad(format!("schedule.alpha = {} must be positive", self.schedule.alpha));
        }
        self.noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.backend != Backend::TrotterNoisy && !self.noise.is_noiseless() {
            return bad(format!("noise rates are set but backend is {}", self.backend.as_str()));
        }
        if !(self.trotter.epsilon > 0.0 && self.trotter.epsilon < 1.0) {
            return bad(format!("trotter.epsilon = {} must be in (0, 1)", self.trotter.epsilon));
        }
        if self.trotter.steps == Steps::Fixed(0) {
            return bad("trotter.steps must be at least 1".into());
        }
        if !(self.trotter.cost_scale > 0.0 && self.trotter.cost_scale.is_finite()) {
            return bad(format!("trotter.cost_scale = {} must be positive", self.trotter.cost_scale));
        }
        if self.ist.iters == 0 || self.ist.extension == 0 {
            return bad("ist.iters and ist.extension must be at least 1".into());
        }
        if !(self.ist.threshold_decay > 0.0 && self.ist.threshold_decay < 1.0) {
            return bad(format!("ist.threshold_decay = {} must be in (0, 1)", self.ist.threshold_decay));
        }
        Ok(())
    }
}
