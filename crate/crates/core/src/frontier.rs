//! Risk-return curves, drawdown-constrained return maximization over a
//! `(gamma, d_max)` grid, and domination certificates against proportional
//! betting.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{self, PairedDifferences};
use crate::error::{Error, Result};
use crate::expectation::{estimate_batch, Backend, RiskReturnEstimate};
use crate::return_model::ReturnDistribution;
use crate::simulator::SimulationConfig;
use crate::strategy::{check_admissible, MarkowitzStrategy, ModulatedStrategy, Strategy};

/// Feasibility band used with exact backends.
pub const EXACT_TOLERANCE: f64 = 1e-10;

/// Feasibility band used with Monte-Carlo backends unless overridden.
pub const DEFAULT_MC_TOLERANCE: f64 = 1e-3;

/// Distance of the replication fallback `d_max = 1 - eps` from 1.
pub const FALLBACK_EPSILON: f64 = 1e-12;

/// Gap threshold, in combined standard errors, for a strict Monte-Carlo certificate.
pub const STRICT_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaGrid {
    /// The same gains for every `d_max`.
    Explicit(Vec<f64>),
    /// `points` evenly spaced gains spanning the admissible interval for each
    /// `d_max` (survival bounds, intersected with `|gamma| <= 1/d_max` under
    /// cash financing).
    Span { points: usize },
}

fn default_cash_financed() -> bool {
    true
}

/// Drawdown-constrained maximization problem: maximize `R̄_M` subject to
/// `|d̄*_M - target_drawdown| <= tolerance` over a `(gamma, d_max)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierQuery {
    pub target_drawdown: f64,
    pub tolerance: f64,
    pub gamma_grid: GammaGrid,
    pub dmax_grid: Vec<f64>,
    pub backend: Backend,
    #[serde(default = "default_cash_financed")]
    pub cash_financed: bool,
}

/// `{0.01, 0.02, ..., 0.99}`.
pub fn default_dmax_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i == points - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    }
}

impl FrontierQuery {
    /// Default grids: 101 gains spanning the admissible interval, `d_max` in
    /// `{0.01, ..., 0.99}`, cash-financed.
    pub fn with_defaults(target_drawdown: f64, backend: Backend) -> Self {
        FrontierQuery {
            target_drawdown,
            tolerance: if backend.is_monte_carlo() {
                DEFAULT_MC_TOLERANCE
            } else {
                EXACT_TOLERANCE
            },
            gamma_grid: GammaGrid::Span { points: 101 },
            dmax_grid: default_dmax_grid(),
            backend,
            cash_financed: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidQuery(msg));
        if !(self.target_drawdown > 0.0 && self.target_drawdown < 1.0) {
            return invalid(format!(
                "target drawdown {} not in (0, 1)",
                self.target_drawdown
            ));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return invalid(format!(
                "tolerance {} must be finite and nonnegative",
                self.tolerance
            ));
        }
        if self.backend.is_monte_carlo() && self.tolerance == 0.0 {
            return invalid("Monte-Carlo backends need a positive tolerance".into());
        }
        if self.dmax_grid.is_empty() {
            return invalid("empty d_max grid".into());
        }
        if let Some(d) = self.dmax_grid.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return invalid(format!("d_max {d} not in (0, 1)"));
        }
        match &self.gamma_grid {
            GammaGrid::Explicit(g) if g.is_empty() => invalid("empty gamma grid".into()),
            GammaGrid::Span { points: 0 } => invalid("gamma span needs at least one point".into()),
            _ => Ok(()),
        }
    }

    /// Expands the grid into admissible modulators for `dist`.
    pub fn candidates(&self, dist: &ReturnDistribution) -> Result<Vec<ModulatedStrategy>> {
        self.validate()?;
        let mut out = Vec::new();
        for &d_max in &self.dmax_grid {
            let gammas = match &self.gamma_grid {
                GammaGrid::Explicit(g) => g.clone(),
                GammaGrid::Span { points } => {
                    let mut lo = -1.0 / dist.x_max();
                    let mut hi = 1.0 / dist.x_min().abs();
                    if self.cash_financed {
                        lo = lo.max(-1.0 / d_max);
                        hi = hi.min(1.0 / d_max);
                    }
                    linspace(lo, hi, *points)
                }
            };
            for gamma in gammas {
                let s = ModulatedStrategy {
                    gamma,
                    d_max,
                    cash_financed: self.cash_financed,
                };
                check_admissible(&s.into(), dist).map_err(|report| {
                    Error::InvalidQuery(format!("grid point outside admissible set: {report}"))
                })?;
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// One evaluated strategy on a risk-return plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub params: Strategy,
    pub estimate: RiskReturnEstimate,
    /// Whether `|d̄* - target| <= tolerance`; `None` when no target applies.
    pub feasible: Option<bool>,
}

/// Raised when no grid point lands inside the drawdown band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleTarget {
    pub target_drawdown: f64,
    pub tolerance: f64,
    /// Closest misses by `|d̄* - target|`, nearest first.
    pub nearest: Vec<FrontierPoint>,
}

impl fmt::Display for InfeasibleTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no grid point reaches expected drawdown {} within {}",
            self.target_drawdown, self.tolerance
        )?;
        if let Some(p) = self.nearest.first() {
            write!(f, " (nearest: {})", p.estimate.mean_max_drawdown)?;
        }
        Ok(())
    }
}

/// `{(R̄_K, d̄*_K)}` over a gain grid, estimated on common random numbers.
pub fn markowitz_curve(
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    k_grid: &[MarkowitzStrategy],
    backend: Backend,
) -> Result<Vec<FrontierPoint>> {
    if k_grid.is_empty() {
        return Err(Error::InvalidQuery("empty gain grid".into()));
    }
    let strategies: Vec<Strategy> = k_grid.iter().map(|&k| k.into()).collect();
    for s in &strategies {
        check_admissible(s, dist).map_err(Error::Inadmissible)?;
    }
    let estimates = estimate_batch(&strategies, dist, cfg, backend)?;
    Ok(strategies
        .into_iter()
        .zip(estimates)
        .map(|(params, estimate)| FrontierPoint {
            params,
            estimate,
            feasible: None,
        })
        .collect())
}

/// Evaluates every candidate modulator; feasibility is left unset.
pub fn evaluate_modulators(
    candidates: &[ModulatedStrategy],
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    backend: Backend,
) -> Result<Vec<FrontierPoint>> {
    let strategies: Vec<Strategy> = candidates.iter().map(|&m| m.into()).collect();
    let estimates = estimate_batch(&strategies, dist, cfg, backend)?;
    Ok(strategies
        .into_iter()
        .zip(estimates)
        .map(|(params, estimate)| FrontierPoint {
            params,
            estimate,
            feasible: None,
        })
        .collect())
}

fn tie_key(p: &FrontierPoint) -> (f64, f64) {
    match p.params {
        Strategy::Modulated(m) => (m.d_max, m.gamma.abs()),
        Strategy::Markowitz(k) => (1.0, k.gain.abs()),
    }
}

/// Better point first: higher `R̄`, then smaller `d_max`, then smaller `|gamma|`.
fn prefer(a: &FrontierPoint, b: &FrontierPoint) -> bool {
    let (ra, rb) = (a.estimate.mean_return, b.estimate.mean_return);
    if ra != rb {
        return ra > rb;
    }
    tie_key(a) < tie_key(b)
}

/// Marks feasibility against `target` and returns the best feasible point.
pub fn select_optimum(
    points: &mut [FrontierPoint],
    target: f64,
    tolerance: f64,
) -> std::result::Result<FrontierPoint, InfeasibleTarget> {
    let mut best: Option<FrontierPoint> = None;
    for p in points.iter_mut() {
        let ok = (p.estimate.mean_max_drawdown - target).abs() <= tolerance;
        p.feasible = Some(ok);
        if ok && best.as_ref().is_none_or(|b| prefer(p, b)) {
            best = Some(*p);
        }
    }
    best.ok_or_else(|| {
        let mut nearest: Vec<FrontierPoint> = points.to_vec();
        nearest.sort_by(|a, b| {
            let da = (a.estimate.mean_max_drawdown - target).abs();
            let db = (b.estimate.mean_max_drawdown - target).abs();
            da.total_cmp(&db)
        });
        nearest.truncate(5);
        InfeasibleTarget {
            target_drawdown: target,
            tolerance,
            nearest,
        }
    })
}

/// Outcome of a constrained search: the optimum and every evaluated point.
#[derive(Debug, Clone, Serialize)]
pub struct FrontierSearch {
    pub best: FrontierPoint,
    pub evaluated: Vec<FrontierPoint>,
}

/// Maximizes `R̄_M` subject to the query's drawdown band by exhaustive grid
/// evaluation on common random numbers.
pub fn maximize_modulated_return(
    query: &FrontierQuery,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
) -> Result<FrontierSearch> {
    let candidates = query.candidates(dist)?;
    let mut evaluated = evaluate_modulators(&candidates, dist, cfg, query.backend)?;
    let best = select_optimum(&mut evaluated, query.target_drawdown, query.tolerance)
        .map_err(|e| Error::Infeasible(Box::new(e)))?;
    Ok(FrontierSearch { best, evaluated })
}

/// Modulated optimum at the drawdown of a proportional strategy, and the
/// return advantage it achieves.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub gain: f64,
    /// `d̄*_K`, used as the target of the constrained search.
    pub target_drawdown: f64,
    pub tolerance: f64,
    pub markowitz: RiskReturnEstimate,
    pub modulated: FrontierPoint,
    /// `R̄_M - R̄_K`.
    pub return_gap: f64,
    /// `d̄*_M - d̄*_K`.
    pub drawdown_gap: f64,
    /// `sqrt(se_M^2 + se_K^2)` of the two return estimates.
    pub combined_std_error: f64,
    /// Standard error of the per-path return difference (Monte-Carlo only).
    pub paired_std_error: Option<f64>,
    /// Gap exceeds `4 * combined_std_error` (Monte-Carlo) or `1e-10` (exact).
    pub strict: bool,
    /// Gap is no worse than estimator noise.
    pub weakly_dominates: bool,
    pub evaluated_points: usize,
}

/// Certifies domination of proportional gain `k`: targets `d̂ = d̄*_K` and
/// searches the template's grid plus the replication point
/// `(gamma = K, d_max = 1 - eps)`.
pub fn certify_domination(
    k: f64,
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    template: &FrontierQuery,
) -> Result<DominationReport> {
    Ok(certify_domination_sweep(&[k], dist, cfg, template)?.remove(0))
}

/// [`certify_domination`] for several gains sharing one grid evaluation.
pub fn certify_domination_sweep(
    gains: &[f64],
    dist: &ReturnDistribution,
    cfg: &SimulationConfig,
    template: &FrontierQuery,
) -> Result<Vec<DominationReport>> {
    if gains.is_empty() {
        return Err(Error::InvalidQuery("no gains to certify".into()));
    }
    let markowitz: Vec<MarkowitzStrategy> = gains
        .iter()
        .map(|&gain| MarkowitzStrategy {
            gain,
            cash_financed: template.cash_financed,
        })
        .collect();
    let curve = markowitz_curve(dist, cfg, &markowitz, template.backend)?;

    let mut candidates = template.candidates(dist)?;
    for &gain in gains {
        candidates.push(ModulatedStrategy {
            gamma: gain,
            d_max: 1.0 - FALLBACK_EPSILON,
            cash_financed: template.cash_financed,
        });
    }
    let evaluated = evaluate_modulators(&candidates, dist, cfg, template.backend)?;

    let mut reports = Vec::with_capacity(gains.len());
    for (&gain, mk) in gains.iter().zip(&curve) {
        let target = mk.estimate.mean_max_drawdown;
        let mut points = evaluated.clone();
        let best = select_optimum(&mut points, target, template.tolerance)
            .map_err(|e| Error::Infeasible(Box::new(e)))?;

        let return_gap = best.estimate.mean_return - mk.estimate.mean_return;
        let combined = best
            .estimate
            .std_error_return
            .hypot(mk.estimate.std_error_return);
        let paired_std_error = match template.backend {
            Backend::MonteCarlo { paths, seed } => {
                let pair = [best.params, mk.params];
                let diff = engine::simulate(&pair, dist, cfg.n, paths, seed, || {
                    PairedDifferences::new(vec![(0, 1)])
                })?;
                Some(diff.return_diff[0].std_error())
            }
            _ => None,
        };
        let (strict, noise) = if template.backend.is_monte_carlo() {
            (
                return_gap > STRICT_SIGMAS * combined,
                STRICT_SIGMAS * combined,
            )
        } else {
            (return_gap > EXACT_TOLERANCE, EXACT_TOLERANCE)
        };
        reports.push(DominationReport {
            gain,
            target_drawdown: target,
            tolerance: template.tolerance,
            markowitz: mk.estimate,
            modulated: best,
            return_gap,
            drawdown_gap: best.estimate.mean_max_drawdown - target,
            combined_std_error: combined,
            paired_std_error,
            strict,
            weakly_dominates: return_gap >= -noise.max(1e-9 * mk.estimate.mean_return.abs()),
            evaluated_points: points.len(),
        });
    }
    Ok(reports)
}

fn feasible_cell(p: &FrontierPoint) -> &'static str {
    match p.feasible {
        Some(true) => "true",
        Some(false) => "false",
        None => "",
    }
}

/// Frontier CSV. Modulated points use columns `gamma,d_max`; proportional
/// points use `K`. Mixed slices are written with all three columns.
pub fn write_frontier_csv<W: Write>(mut out: W, points: &[FrontierPoint]) -> std::io::Result<()> {
    let all_mod = points
        .iter()
        .all(|p| matches!(p.params, Strategy::Modulated(_)));
    let all_k = points
        .iter()
        .all(|p| matches!(p.params, Strategy::Markowitz(_)));
    let head = if all_k && !points.is_empty() {
        "K"
    } else if all_mod {
        "gamma,d_max"
    } else {
        "K,gamma,d_max"
    };
    writeln!(
        out,
        "{head},mean_return,mean_max_drawdown,std_error_return,std_error_drawdown,feasible"
    )?;
    for p in points {
        let params = match (p.params, all_k, all_mod) {
            (Strategy::Markowitz(k), true, _) => format!("{}", k.gain),
            (Strategy::Modulated(m), _, true) => format!("{},{}", m.gamma, m.d_max),
            (Strategy::Markowitz(k), _, _) => format!("{},,", k.gain),
            (Strategy::Modulated(m), _, _) => format!(",{},{}", m.gamma, m.d_max),
        };
        let e = &p.estimate;
        writeln!(
            out,
            "{params},{},{},{},{},{}",
            e.mean_return,
            e.mean_max_drawdown,
            e.std_error_return,
            e.std_error_drawdown,
            feasible_cell(p)
        )?;
    }
    Ok(())
}
