//! Expected return and expected maximum percentage drawdown.
//!
//! Three interchangeable backends: closed forms (where they exist), exact
//! enumeration of every return path, and Monte-Carlo with common random
//! numbers across all strategies of a batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, LaneMoments};
use crate::error::{Error, Result};
use crate::return_model::{enumerate_paths, ReturnDistribution, DEFAULT_ENUMERATION_CAP};
use crate::simulator::{run_path, SimulationConfig};
use crate::stats::CompensatedSum;
use crate::strategy::{require_admissible, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Enumeration,
    MonteCarlo,
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

/// Estimator selection, as written in experiment configs:
/// `{"method": "monte_carlo", "paths": 100000, "seed": 7}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Backend {
    ClosedForm,
    Exact {
        #[serde(default = "default_cap")]
        cap: u64,
    },
    MonteCarlo {
        paths: u64,
        seed: u64,
    },
}

impl Backend {
    pub fn exact() -> Self {
        Backend::Exact {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, Backend::MonteCarlo { .. })
    }
}

/// `(R̄, d̄*)` with the metadata of the estimator that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReturnEstimate {
    pub mean_return: f64,
    pub mean_max_drawdown: f64,
    pub method: Method,
    pub paths: u64,
    pub seed: u64,
    pub std_error_return: f64,
    pub std_error_drawdown: f64,
}

impl RiskReturnEstimate {
    fn exact(method: Method, mean_return: f64, mean_max_drawdown: f64) -> Self {
        RiskReturnEstimate {
            mean_return,
            mean_max_drawdown,
            method,
            paths: 0,
            seed: 0,
            std_error_return: 0.0,
            std_error_drawdown: 0.0,
        }
    }
}

/// `(1 + K mu)^N - 1`.
pub fn markowitz_expected_return(k: f64, mu: f64, n: usize) -> f64 {
    let base = 1.0 + k * mu;
    match i32::try_from(n) {
        Ok(n) => base.powi(n) - 1.0,
        Err(_) => base.powf(n as f64) - 1.0,
    }
}

/// Drawdown after losing every bet: `1 - (1 - |K| max(|x_min|, x_max))^N`,
/// clamped to `[0, 1]`.
pub fn markowitz_worst_case_drawdown(k: f64, dist: &ReturnDistribution, n: usize) -> f64 {
    let per_stage = (k.abs() * dist.max_abs_return()).min(1.0);
    let survive = 1.0 - per_stage;
    let n = i32::try_from(n).unwrap_or(i32::MAX);
    (1.0 - survive.powi(n)).clamp(0.0, 1.0)
}

/// Two-stage even-money coin, proportional betting: `(R̄_K, d̄*_K)` with
/// `R̄_K = (1 + K(2p-1))^2 - 1` and `d̄*_K = K(1-p)(2 - K + Kp)`.
pub fn n2_markowitz_closed_form(k: f64, p: f64) -> (f64, f64) {
    let mean_return = (1.0 + k * (2.0 * p - 1.0)).powi(2) - 1.0;
    let mean_dd = k * (1.0 - p) * (2.0 - k + k * p);
    (mean_return, mean_dd)
}

/// Two-stage even-money coin, modulated betting: `(R̄_M, d̄*_M)` with
/// `R̄_M = g d (2p-1)(g d p + g p - g + 2)` and `d̄*_M = g d (1-p)(2 - g + g p)`.
pub fn n2_modulated_closed_form(gamma: f64, d_max: f64, p: f64) -> (f64, f64) {
    let gd = gamma * d_max;
    let mean_return = gd * (2.0 * p - 1.0) * (gd * p + gamma * p - gamma + 2.0);
    let mean_dd = gd * (1.0 - p) * (2.0 - gamma + gamma * p);
    (mean_return, mean_dd)
}

/// `d_max` at which the `gamma = 1` modulator has the same two-stage expected
/// drawdown as proportional gain `K`: `K(2 - K + Kp) / (1 + p)`.
pub fn matching_dmax(k: f64, p: f64) -> f64 {
    k * (2.0 - k + k * p) / (1.0 + p)
}

/// Return advantage of the matched `gamma = 1` modulator at `N = 2`:
/// `K^2 (1-K)(1-p) p (2p-1)(3 + p + Kp - K) / (1+p)^2`.
pub fn n2_domination_gap(k: f64, p: f64) -> f64 {
    k * k * (1.0 - k) * (1.0 - p) * p * (2.0 * p - 1.0) * (3.0 + p + k * p - k) / (1.0 + p).powi(2)
}

/// Exact `(R̄, d̄*, E[log growth])` by enumerating every path through the
/// reference simulator.
fn enumerate_expectations(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    cap: u64,
    want_log: bool,
) -> Result<(f64, f64, Option<f64>)> {
    require_admissible(strategy, dist)?;
    cfg.validate()?;
    let mut ret = CompensatedSum::default();
    let mut dd = CompensatedSum::default();
    let mut log = CompensatedSum::default();
    for (returns, prob) in enumerate_paths(dist, cfg.n, cap)? {
        let (stats, _) = run_path(strategy, cfg, &returns, false)?;
        ret.add(prob * stats.overall_return);
        dd.add(prob * stats.max_pct_drawdown);
        if want_log {
            if stats.final_value <= 0.0 {
                return Err(Error::LogOfZero);
            }
            log.add(prob * stats.log_growth);
        }
    }
    Ok((ret.value(), dd.value(), want_log.then(|| log.value())))
}

/// Probability-weighted `(R̄, d̄*)` over all `|outcomes|^N` paths.
pub fn exact_estimate(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    cap: u64,
) -> Result<RiskReturnEstimate> {
    let (r, d, _) = enumerate_expectations(strategy, dist, cfg, cap, false)?;
    Ok(RiskReturnEstimate::exact(Method::Enumeration, r, d))
}

/// Sample means over `paths` simulated paths, with standard errors.
pub fn monte_carlo_estimate(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    paths: u64,
    seed: u64,
) -> Result<RiskReturnEstimate> {
    Ok(monte_carlo_batch(std::slice::from_ref(strategy), dist, cfg, paths, seed)?.remove(0))
}

/// Monte-Carlo estimates for several strategies on common random numbers.
pub fn monte_carlo_batch(
    strategies: &[Strategy],
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    paths: u64,
    seed: u64,
) -> Result<Vec<RiskReturnEstimate>> {
    cfg.validate()?;
    for s in strategies {
        require_admissible(s, dist)?;
    }
    let moments = engine::simulate(strategies, dist, cfg.n, paths, seed, || {
        LaneMoments::new(strategies.len(), false)
    })?;
    Ok(moments
        .overall_return
        .iter()
        .zip(&moments.max_drawdown)
        .map(|(r, d)| RiskReturnEstimate {
            mean_return: r.mean(),
            mean_max_drawdown: d.mean(),
            method: Method::MonteCarlo,
            paths,
            seed,
            std_error_return: r.std_error(),
            std_error_drawdown: d.std_error(),
        })
        .collect())
}

/// Closed-form estimate. `R̄` is available for proportional betting at any
/// horizon; `d̄*` only for the two-stage `{+1, -1}` coin with a nonnegative
/// gain (and `R̄` of the modulated law likewise).
pub fn closed_form_estimate(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
) -> Result<RiskReturnEstimate> {
    require_admissible(strategy, dist)?;
    cfg.validate()?;
    let unavailable = || {
        Error::ClosedFormUnavailable(format!(
            "expected max drawdown is only tabulated for N = 2 on a +/-1 coin, got N = {}",
            cfg.n
        ))
    };
    if cfg.n != 2 || dist.even_money_stake() != Some(1.0) {
        return Err(unavailable());
    }
    let p = dist.win_probability().expect("two-outcome law");
    let (r, d) = match strategy {
        Strategy::Markowitz(m) if m.gain >= 0.0 => n2_markowitz_closed_form(m.gain, p),
        Strategy::Modulated(m) if m.gamma >= 0.0 => n2_modulated_closed_form(m.gamma, m.d_max, p),
        _ => {
            return Err(Error::ClosedFormUnavailable(
                "two-stage closed forms assume a long (nonnegative) gain".into(),
            ))
        }
    };
    Ok(RiskReturnEstimate::exact(Method::ClosedForm, r, d))
}

/// Dispatches to the selected backend.
pub fn estimate(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    backend: Backend,
) -> Result<RiskReturnEstimate> {
    match backend {
        Backend::ClosedForm => closed_form_estimate(strategy, dist, cfg),
        Backend::Exact { cap } => exact_estimate(strategy, dist, cfg, cap),
        Backend::MonteCarlo { paths, seed } => {
            monte_carlo_estimate(strategy, dist, cfg, paths, seed)
        }
    }
}

/// Estimates for many strategies; Monte-Carlo batches share random numbers.
pub fn estimate_batch(
    strategies: &[Strategy],
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    backend: Backend,
) -> Result<Vec<RiskReturnEstimate>> {
    match backend {
        Backend::MonteCarlo { paths, seed } => {
            monte_carlo_batch(strategies, dist, cfg, paths, seed)
        }
        _ => strategies
            .par_iter()
            .map(|s| estimate(s, dist, cfg, backend))
            .collect(),
    }
}

/// `E[ln(V(N)/V(0))]` by enumeration or Monte-Carlo.
pub fn expected_log_growth(
    strategy: &Strategy,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    backend: Backend,
) -> Result<f64> {
    match backend {
        Backend::Exact { cap } => {
            let (_, _, log) = enumerate_expectations(strategy, dist, cfg, cap, true)?;
            Ok(log.expect("requested"))
        }
        Backend::MonteCarlo { paths, seed } => {
            require_admissible(strategy, dist)?;
            cfg.validate()?;
            let m = engine::simulate(
                std::slice::from_ref(strategy),
                dist,
                cfg.n,
                paths,
                seed,
                || LaneMoments::new(1, true),
            )?;
            if m.ruined_paths[0] > 0 {
                return Err(Error::LogOfZero);
            }
            Ok(m.log_growth.expect("tracked")[0].mean())
        }
        Backend::ClosedForm => Err(Error::ClosedFormUnavailable(
            "expected log growth has no closed form here".into(),
        )),
    }
}
