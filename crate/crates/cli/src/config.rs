//! Experiment configuration as read from JSON, and its resolution against
//! command-line overrides.

use std::path::{Path, PathBuf};

use ddlab_core::frontier::{default_dmax_grid, DEFAULT_MC_TOLERANCE, EXACT_TOLERANCE};
use ddlab_core::{
    Backend, DistributionSpec, GammaGrid, ReturnDistribution, SimulationConfig, Strategy,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Top-level experiment file.
///
/// `threads` and `out` only affect where and how fast a run executes, so they
/// are left out of the provenance record embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// One path of one strategy, sampled from `seed` or replayed from `returns`.
    Simulate {
        strategy: Strategy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        returns: Option<Vec<f64>>,
    },
    SweepMarkowitz {
        k_grid: Vec<f64>,
        #[serde(default)]
        cash_financed: Option<bool>,
    },
    Frontier {
        targets: Vec<f64>,
        #[serde(flatten)]
        grid: GridSpec,
    },
    Certify {
        gains: Vec<f64>,
        #[serde(flatten)]
        grid: GridSpec,
    },
    VerifyN2 {
        #[serde(default)]
        k_grid: Option<Vec<f64>>,
        #[serde(default)]
        p_grid: Option<Vec<f64>>,
    },
}

/// Modulator search grid shared by `frontier` and `certify`. Missing fields
/// take the library defaults during resolution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub gamma_grid: Option<GammaGrid>,
    #[serde(default)]
    pub dmax_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub cash_financed: Option<bool>,
}

/// Points per axis of the default `verify_n2` grid.
pub const VERIFY_GRID_POINTS: usize = 50;

/// `points` interior points of `(lo, hi)`, endpoints excluded.
pub fn interior_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
        .collect()
}

/// Command-line overrides; each one replaces the matching config field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies overrides, fills defaults and validates every referenced spec.
    pub fn resolve(mut self, ov: &Overrides) -> Result<Self, CliError> {
        if ov.seed.is_some() {
            self.seed = ov.seed;
        }
        if ov.threads.is_some() {
            self.threads = ov.threads;
        }
        if ov.out.is_some() {
            self.out = ov.out.clone();
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }

        // One seed governs the run: an explicit seed wins over the backend's.
        if let Some(Backend::MonteCarlo { paths, seed }) = self.backend {
            match self.seed {
                Some(s) => self.backend = Some(Backend::MonteCarlo { paths, seed: s }),
                None => self.seed = Some(seed),
            }
        }

        let needs_model = !matches!(self.experiment, Experiment::VerifyN2 { .. });
        let dist = if needs_model {
            self.simulation()?.validate()?;
            Some(self.distribution()?)
        } else {
            None
        };

        let backend = self.backend;
        match &mut self.experiment {
            Experiment::Simulate { strategy, returns } => {
                ddlab_core::strategy::require_admissible(
                    strategy,
                    dist.as_ref().expect("checked"),
                )?;
                let n = self.simulation.expect("checked").n;
                match returns {
                    Some(r) if r.len() != n => {
                        return Err(ddlab_core::Error::HorizonMismatch {
                            expected: n,
                            got: r.len(),
                        }
                        .into())
                    }
                    Some(_) => {}
                    None if self.seed.is_none() => {
                        return Err(CliError::Config(
                            "simulate needs an explicit seed or a returns override".into(),
                        ))
                    }
                    None => {}
                }
            }
            Experiment::SweepMarkowitz {
                k_grid,
                cash_financed,
            } => {
                require_backend(backend)?;
                if k_grid.is_empty() {
                    return Err(CliError::Config("empty K grid".into()));
                }
                cash_financed.get_or_insert(true);
            }
            Experiment::Frontier { targets, grid } => {
                let backend = require_backend(backend)?;
                if targets.is_empty() {
                    return Err(CliError::Config("no target drawdowns".into()));
                }
                grid.fill_defaults(backend);
                for &t in targets.iter() {
                    grid.query(t, backend).validate()?;
                }
            }
            Experiment::Certify { gains, grid } => {
                let backend = require_backend(backend)?;
                if gains.is_empty() {
                    return Err(CliError::Config("no gains to certify".into()));
                }
                grid.fill_defaults(backend);
                // Any interior target exercises the grid checks.
                grid.query(0.5, backend).validate()?;
            }
            Experiment::VerifyN2 { k_grid, p_grid } => {
                let k = k_grid.get_or_insert_with(|| interior_grid(0.0, 1.0, VERIFY_GRID_POINTS));
                let p = p_grid.get_or_insert_with(|| interior_grid(0.5, 1.0, VERIFY_GRID_POINTS));
                if k.is_empty() || p.is_empty() {
                    return Err(CliError::Config("empty verification grid".into()));
                }
                if let Some(v) = k.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                    return Err(CliError::Config(format!("K = {v} not in (0, 1)")));
                }
                if let Some(v) = p.iter().find(|v| !(**v > 0.5 && **v < 1.0)) {
                    return Err(CliError::Config(format!("p = {v} not in (1/2, 1)")));
                }
            }
        }
        Ok(self)
    }

    pub fn distribution(&self) -> Result<ReturnDistribution, CliError> {
        let spec = self
            .distribution
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"distribution\"".into()))?;
        Ok(ReturnDistribution::try_from(spec)?)
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        self.simulation
            .ok_or_else(|| CliError::Config("missing \"simulation\"".into()))
    }

    /// Compact JSON of the resolved config, for provenance lines.
    pub fn provenance(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn require_backend(backend: Option<Backend>) -> Result<Backend, CliError> {
    backend.ok_or_else(|| CliError::Config("this experiment needs a \"backend\"".into()))
}

impl GridSpec {
    fn fill_defaults(&mut self, backend: Backend) {
        self.tolerance.get_or_insert(if backend.is_monte_carlo() {
            DEFAULT_MC_TOLERANCE
        } else {
            EXACT_TOLERANCE
        });
        self.gamma_grid
            .get_or_insert(GammaGrid::Span { points: 101 });
        self.dmax_grid.get_or_insert_with(default_dmax_grid);
        self.cash_financed.get_or_insert(true);
    }

    /// Query for one target; call after resolution so every field is set.
    pub fn query(&self, target: f64, backend: Backend) -> ddlab_core::FrontierQuery {
        ddlab_core::FrontierQuery {
            target_drawdown: target,
            tolerance: self.tolerance.expect("resolved"),
            gamma_grid: self.gamma_grid.clone().expect("resolved"),
            dmax_grid: self.dmax_grid.clone().expect("resolved"),
            backend,
            cash_financed: self.cash_financed.expect("resolved"),
        }
    }
}
