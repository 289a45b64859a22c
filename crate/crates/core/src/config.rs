//! Experiment configuration file.
//!
//! ```toml
//! [instance]
//! n = 5
//! n_i = 10
//! m = 100
//! alpha = 0.95
//! bounds = 10.0
//! seed = 2025
//!
//! [solver]
//! iterations = 20000
//! batch_sizes = [5, 20, 100]
//! seeds = [0, 1, 2, 3, 4]
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::log_grid;
use crate::error::{Error, Result};
use crate::game::CvarInstance;
use crate::solver::{LogCadence, StepSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: CvarInstance,
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub iterations: usize,
    /// Each entry runs with equal primal and dual batch sizes unless
    /// `dual_batch_sizes` pairs it with a different one.
    pub batch_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_batch_sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub schedule: StepSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_schedule: Option<StepSchedule>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub cadence: LogCadence,
    /// Iterations at which the gap is evaluated. Defaults to half-decade
    /// steps from 100 up to the final iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// Seed of the sampled part of the probe set.
    #[serde(default)]
    pub probe_seed: u64,
    #[serde(default = "default_residual_step")]
    pub residual_step: f64,
}

fn default_residual_step() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub emit_svg: bool,
    #[serde(default = "yes")]
    pub emit_csv: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("drne-out")
}

fn yes() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            emit_svg: true,
            emit_csv: true,
        }
    }
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// The five-seed, three-batch-size experiment on the default instance.
    pub fn default_experiment() -> Self {
        Self {
            instance: CvarInstance::default(),
            solver: SolverBlock {
                iterations: 20_000,
                batch_sizes: vec![5, 20, 100],
                dual_batch_sizes: None,
                schedule: StepSchedule::Theorem1,
                dual_schedule: None,
                seeds: vec![0, 1, 2, 3, 4],
                cadence: LogCadence::Geometric,
                checkpoints: None,
                probe_seed: 0,
                residual_step: default_residual_step(),
            },
            output: OutputBlock::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("<document>", e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            config_err(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.instance
            .validate()
            .map_err(|e| config_err("instance", e.to_string()))?;
        let s = &self.solver;
        let m = self.instance.m;
        if s.iterations == 0 {
            return Err(config_err("solver.iterations", "must be positive"));
        }
        if s.batch_sizes.is_empty() {
            return Err(config_err("solver.batch_sizes", "at least one batch size is required"));
        }
        for (k, &b) in s.batch_sizes.iter().enumerate() {
            if b == 0 || b > m {
                return Err(config_err(format!("solver.batch_sizes[{k}]"), format!("{b} not in 1..={m}")));
            }
        }
        if let Some(dual) = &s.dual_batch_sizes {
            if dual.len() != s.batch_sizes.len() {
                return Err(config_err(
                    "solver.dual_batch_sizes",
                    format!("expected {} entries, got {}", s.batch_sizes.len(), dual.len()),
                ));
            }
            for (k, &b) in dual.iter().enumerate() {
                if b == 0 || b > m {
                    return Err(config_err(format!("solver.dual_batch_sizes[{k}]"), format!("{b} not in 1..={m}")));
                }
            }
        }
        s.schedule
            .validate()
            .map_err(|e| config_err("solver.schedule", e.to_string()))?;
        if let Some(d) = &s.dual_schedule {
            d.validate().map_err(|e| config_err("solver.dual_schedule", e.to_string()))?;
        }
        if s.seeds.is_empty() {
            return Err(config_err("solver.seeds", "at least one seed is required"));
        }
        let mut seen = s.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("solver.seeds", "seeds must be distinct"));
        }
        if let LogCadence::Every(0) = s.cadence {
            return Err(config_err("solver.cadence", "interval must be positive"));
        }
        if let Some(cps) = &s.checkpoints {
            if cps.is_empty() {
                return Err(config_err("solver.checkpoints", "must not be empty"));
            }
            for (k, &t) in cps.iter().enumerate() {
                if t == 0 || t > s.iterations {
                    return Err(config_err(
                        format!("solver.checkpoints[{k}]"),
                        format!("{t} not in 1..={}", s.iterations),
                    ));
                }
            }
        }
        if !(s.residual_step > 0.0 && s.residual_step.is_finite()) {
            return Err(config_err("solver.residual_step", "must be positive"));
        }
        Ok(())
    }

    /// `(primal, dual)` batch size pairs in run order.
    pub fn batch_pairs(&self) -> Vec<(usize, usize)> {
        let dual = self.solver.dual_batch_sizes.as_ref().unwrap_or(&self.solver.batch_sizes);
        self.solver.batch_sizes.iter().copied().zip(dual.iter().copied()).collect()
    }

    /// Sorted, deduplicated gap checkpoints; always includes the last iteration.
    pub fn gap_checkpoints(&self) -> Vec<usize> {
        let t_max = self.solver.iterations;
        let mut cps = match &self.solver.checkpoints {
            Some(c) => c.clone(),
            None => {
                let top = (t_max as f64).log10();
                if top < 2.0 {
                    vec![t_max]
                } else {
                    log_grid(2.0, top, 0.5)
                }
            }
        };
        cps.retain(|&t| t >= 1 && t <= t_max);
        cps.push(t_max);
        cps.sort_unstable();
        cps.dedup();
        cps
    }
}
