//! Experiment runner behind the `ddlab` binary.
//!
//! A run reads one JSON [`ExperimentConfig`], resolves it against command-line
//! overrides, and writes CSV/JSON artifacts into the output directory. Every
//! artifact carries the resolved config: CSV files as a leading
//! `# config=<json>` line, JSON files under a `"config"` key.

pub mod config;
pub mod verify;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ddlab_core::frontier::{
    certify_domination_sweep, evaluate_modulators, markowitz_curve, select_optimum,
    write_frontier_csv, FrontierPoint, InfeasibleTarget,
};
use ddlab_core::return_model::{path_stream, sample_path};
use ddlab_core::simulator::{run_path, write_trajectory_csv};
use ddlab_core::{MarkowitzStrategy, Strategy};
use serde::Serialize;

pub use config::{Experiment, ExperimentConfig, Overrides};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{message}")]
    Verification {
        message: String,
        report: serde_json::Value,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Verification { .. } => EXIT_VERIFICATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Verification { .. } => "verification",
            CliError::Runtime(_) => "runtime",
        };
        let mut body = serde_json::json!({
            "kind": kind,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Verification { report, .. } = self {
            body["report"] = report.clone();
        }
        serde_json::json!({ "error": body }).to_string()
    }
}

impl From<ddlab_core::Error> for CliError {
    fn from(e: ddlab_core::Error) -> Self {
        use ddlab_core::Error as E;
        match e {
            E::Bankruptcy { .. }
            | E::DrawdownBreach { .. }
            | E::InvalidState(_)
            | E::LogOfZero
            | E::Infeasible(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Files written by a run, in creation order.
pub type Artifacts = Vec<PathBuf>;

/// Loads, resolves and runs the config at `path`.
pub fn run_file(path: &Path, ov: &Overrides) -> Result<Artifacts, CliError> {
    let cfg = ExperimentConfig::load(path)?.resolve(ov)?;
    match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(|| run(&cfg)),
        None => run(&cfg),
    }
}

/// Runs a resolved config.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let mut sink = Sink {
        dir: out,
        provenance: cfg.provenance(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed: cfg.seed,
        written: Vec::new(),
    };
    match &cfg.experiment {
        Experiment::Simulate { strategy, returns } => {
            run_simulate(cfg, strategy, returns.as_deref(), &mut sink)?
        }
        Experiment::SweepMarkowitz {
            k_grid,
            cash_financed,
        } => {
            let dist = cfg.distribution()?;
            let k_grid: Vec<MarkowitzStrategy> = k_grid
                .iter()
                .map(|&gain| MarkowitzStrategy {
                    gain,
                    cash_financed: cash_financed.unwrap_or(true),
                })
                .collect();
            let curve = markowitz_curve(&dist, &cfg.simulation()?, &k_grid, backend(cfg))?;
            sink.csv("markowitz_curve.csv", |w| write_frontier_csv(w, &curve))?;
        }
        Experiment::Frontier { targets, grid } => run_frontier(cfg, targets, grid, &mut sink)?,
        Experiment::Certify { gains, grid } => {
            let dist = cfg.distribution()?;
            let template = grid.query(0.5, backend(cfg));
            let reports = certify_domination_sweep(gains, &dist, &cfg.simulation()?, &template)?;
            sink.json("certify.json", &reports)?;
        }
        Experiment::VerifyN2 { k_grid, p_grid } => {
            let report = verify::verify_grid(
                k_grid.as_deref().expect("resolved"),
                p_grid.as_deref().expect("resolved"),
            )?;
            sink.json("verify_n2.json", &report)?;
            if !report.passed {
                let first = &report.failures[0];
                return Err(CliError::Verification {
                    message: format!(
                        "{} of {} grid points failed; first at K = {}, p = {}: {}",
                        report.failures.len(),
                        report.points,
                        first.point.k,
                        first.point.p,
                        first.reasons.join("; ")
                    ),
                    report: serde_json::to_value(&report.failures).expect("serializes"),
                });
            }
        }
    }
    Ok(sink.written)
}

fn backend(cfg: &ExperimentConfig) -> ddlab_core::Backend {
    cfg.backend.expect("resolved")
}

fn run_simulate(
    cfg: &ExperimentConfig,
    strategy: &Strategy,
    returns: Option<&[f64]>,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let sim = cfg.simulation()?;
    let returns = match returns {
        Some(r) => r.to_vec(),
        None => {
            let mut rng = path_stream(cfg.seed.expect("resolved"), 0);
            sample_path(&dist, sim.n, &mut rng)?
        }
    };
    let (stats, rows) = run_path(strategy, &sim, &returns, true)?;
    let rows = rows.expect("recorded");
    sink.csv("trajectory.csv", |w| write_trajectory_csv(w, &rows))?;
    sink.json("path_stats.json", &stats)?;
    Ok(())
}

#[derive(Serialize)]
struct TargetResult {
    target_drawdown: f64,
    tolerance: f64,
    feasible_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimum: Option<FrontierPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    infeasible: Option<InfeasibleTarget>,
}

fn run_frontier(
    cfg: &ExperimentConfig,
    targets: &[f64],
    grid: &config::GridSpec,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let dist = cfg.distribution()?;
    let sim = cfg.simulation()?;
    let backend = backend(cfg);
    // The grid does not depend on the target, so it is evaluated once.
    let candidates = grid.query(targets[0], backend).candidates(&dist)?;
    let evaluated = evaluate_modulators(&candidates, &dist, &sim, backend)?;
    sink.csv("frontier_grid.csv", |w| write_frontier_csv(w, &evaluated))?;

    let tolerance = grid.tolerance.expect("resolved");
    let results: Vec<TargetResult> = targets
        .iter()
        .map(|&t| {
            let mut points = evaluated.clone();
            let picked = select_optimum(&mut points, t, tolerance);
            let feasible_points = points.iter().filter(|p| p.feasible == Some(true)).count();
            let (optimum, infeasible) = match picked {
                Ok(best) => (Some(best), None),
                Err(miss) => (None, Some(miss)),
            };
            TargetResult {
                target_drawdown: t,
                tolerance,
                feasible_points,
                optimum,
                infeasible,
            }
        })
        .collect();
    sink.json("frontier_optimum.json", &results)
}

/// Writes artifacts into one directory with the provenance header.
struct Sink {
    dir: PathBuf,
    provenance: String,
    config: serde_json::Value,
    seed: Option<u64>,
    written: Artifacts,
}

impl Sink {
    fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "# config={}", self.provenance)?;
            body(&mut w)?;
            w.flush()
        };
        write().map_err(|e| io_error(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let doc = serde_json::json!({
            "config": self.config,
            "seed": self.seed,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}
