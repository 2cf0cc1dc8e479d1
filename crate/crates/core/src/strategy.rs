//! Investment feedback laws: memoryless proportional betting and the
//! drawdown-modulated gain `K(k) = gamma * M(k)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::return_model::ReturnDistribution;

/// Slack for floating-point drift in drawdown and bound comparisons.
pub const DRAWDOWN_TOLERANCE: f64 = 1e-12;

fn default_cash_financed() -> bool {
    true
}

/// Proportional feedback `I(k) = K V(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkowitzStrategy {
    #[serde(rename = "K")]
    pub gain: f64,
    #[serde(default = "default_cash_financed")]
    pub cash_financed: bool,
}

/// Drawdown-modulated feedback `I(k) = gamma M(k) V(k)` with
/// `M(k) = (d_max - d(k)) / (1 - d(k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatedStrategy {
    pub gamma: f64,
    pub d_max: f64,
    #[serde(default = "default_cash_financed")]
    pub cash_financed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Markowitz(MarkowitzStrategy),
    Modulated(ModulatedStrategy),
}

impl MarkowitzStrategy {
    pub fn new(gain: f64) -> Self {
        MarkowitzStrategy {
            gain,
            cash_financed: true,
        }
    }
}

impl ModulatedStrategy {
    pub fn new(gamma: f64, d_max: f64) -> Self {
        ModulatedStrategy {
            gamma,
            d_max,
            cash_financed: true,
        }
    }
}

impl From<MarkowitzStrategy> for Strategy {
    fn from(s: MarkowitzStrategy) -> Self {
        Strategy::Markowitz(s)
    }
}

impl From<ModulatedStrategy> for Strategy {
    fn from(s: ModulatedStrategy) -> Self {
        Strategy::Modulated(s)
    }
}

impl Strategy {
    /// Investment for the next stage given the current account state.
    pub fn investment(&self, state: &AccountState) -> Result<f64> {
        match self {
            Strategy::Markowitz(s) => Ok(markowitz_investment(s, state)),
            Strategy::Modulated(s) => modulated_investment(s, state),
        }
    }

    pub fn cash_financed(&self) -> bool {
        match self {
            Strategy::Markowitz(s) => s.cash_financed,
            Strategy::Modulated(s) => s.cash_financed,
        }
    }

    /// Feedback gain at a fresh peak: `K`, or `gamma * d_max`.
    pub fn peak_gain(&self) -> f64 {
        match self {
            Strategy::Markowitz(s) => s.gain,
            Strategy::Modulated(s) => s.gamma * s.d_max,
        }
    }

    /// Whether the strategy never bets (`K = 0` or `gamma = 0`).
    pub fn is_idle(&self) -> bool {
        match self {
            Strategy::Markowitz(s) => s.gain == 0.0,
            Strategy::Modulated(s) => s.gamma == 0.0,
        }
    }
}

/// Account value, running peak and percentage drawdown to date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub v: f64,
    pub v_max: f64,
    pub d: f64,
}

impl AccountState {
    /// State at stage 0: `V_max(0) = V(0)`, `d(0) = 0`.
    pub fn initial(v0: f64) -> Result<Self> {
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::InvalidInitialValue(v0));
        }
        Ok(AccountState {
            v: v0,
            v_max: v0,
            d: 0.0,
        })
    }

    /// State with drawdown derived from value and peak.
    pub fn from_values(v: f64, v_max: f64) -> Result<Self> {
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidState(format!(
                "peak {v_max} must be positive"
            )));
        }
        if !(v >= 0.0 && v <= v_max) {
            return Err(Error::InvalidState(format!(
                "value {v} must lie in [0, peak {v_max}]"
            )));
        }
        Ok(AccountState {
            v,
            v_max,
            d: (v_max - v) / v_max,
        })
    }
}

/// `I(k) = K V(k)`; negative values are short positions.
pub fn markowitz_investment(s: &MarkowitzStrategy, state: &AccountState) -> f64 {
    s.gain * state.v
}

fn clamp_drawdown(d: f64, d_max: f64) -> Result<f64> {
    if d > d_max + DRAWDOWN_TOLERANCE || d.is_nan() {
        return Err(Error::DrawdownBreach { drawdown: d, d_max });
    }
    Ok(d.min(d_max))
}

/// Drawdown modulator `M(k) = (d_max - d(k)) / (1 - d(k))`, in `[0, d_max]`.
pub fn modulation_factor(state: &AccountState, d_max: f64) -> Result<f64> {
    let d = clamp_drawdown(state.d, d_max)?;
    Ok((d_max - d) / (1.0 - d))
}

pub fn modulated_investment(s: &ModulatedStrategy, state: &AccountState) -> Result<f64> {
    let m = modulation_factor(state, s.d_max)?;
    let investment = s.gamma * m * state.v;
    if s.cash_financed {
        debug_assert!(
            investment.abs() <= state.v * (1.0 + DRAWDOWN_TOLERANCE),
            "cash financing breached: |I| = {} > V = {}",
            investment.abs(),
            state.v
        );
    }
    Ok(investment)
}

/// Closed investment interval that keeps `d(k+1) <= d_max` on every outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvestmentBounds {
    pub lower: f64,
    pub upper: f64,
}

impl InvestmentBounds {
    pub fn contains(&self, investment: f64, slack: f64) -> bool {
        investment >= self.lower - slack && investment <= self.upper + slack
    }
}

/// Necessary and sufficient per-stage investment range for a probability-one
/// drawdown cap of `d_max`.
pub fn lemma_bounds(
    state: &AccountState,
    d_max: f64,
    dist: &ReturnDistribution,
) -> Result<InvestmentBounds> {
    let d = clamp_drawdown(state.d, d_max)?;
    let headroom = (d_max - d) / (1.0 - d) * state.v;
    Ok(InvestmentBounds {
        lower: -headroom / dist.x_max(),
        upper: headroom / dist.x_min().abs(),
    })
}

/// One violated constraint of an admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum Violation {
    /// Gain below `-1/x_max`: a maximal up-move can bankrupt a short position.
    SurvivalLower {
        gain: f64,
        limit: f64,
    },
    /// Gain above `1/|x_min|`: a maximal loss can bankrupt a long position.
    SurvivalUpper {
        gain: f64,
        limit: f64,
    },
    /// `|K| > 1` or `|gamma| d_max > 1` under cash financing.
    CashFinancing {
        leverage: f64,
    },
    /// `d_max` outside `(0, 1)`.
    DrawdownLimit {
        d_max: f64,
    },
    NotFinite {
        parameter: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SurvivalLower { gain, limit } => {
                write!(f, "gain {gain} below survival bound {limit}")
            }
            Violation::SurvivalUpper { gain, limit } => {
                write!(f, "gain {gain} above survival bound {limit}")
            }
            Violation::CashFinancing { leverage } => {
                write!(f, "peak leverage {leverage} exceeds 1 under cash financing")
            }
            Violation::DrawdownLimit { d_max } => write!(f, "d_max {d_max} not in (0, 1)"),
            Violation::NotFinite { parameter } => write!(f, "{parameter} is not finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub strategy: Strategy,
    pub violations: Vec<Violation>,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: ", self.strategy)?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A strategy that passed [`check_admissible`] for some distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleStrategy(Strategy);

impl AdmissibleStrategy {
    pub fn strategy(&self) -> &Strategy {
        &self.0
    }

    pub fn into_inner(self) -> Strategy {
        self.0
    }
}

fn check_gain(gain: f64, dist: &ReturnDistribution, out: &mut Vec<Violation>) {
    let lower = -1.0 / dist.x_max();
    let upper = 1.0 / dist.x_min().abs();
    if gain < lower * (1.0 + DRAWDOWN_TOLERANCE) {
        out.push(Violation::SurvivalLower { gain, limit: lower });
    }
    if gain > upper * (1.0 + DRAWDOWN_TOLERANCE) {
        out.push(Violation::SurvivalUpper { gain, limit: upper });
    }
}

/// Checks survival bounds `-1/x_max <= K (or gamma) <= 1/|x_min|` and, for
/// cash-financed strategies, `|K| <= 1` or `|gamma| d_max <= 1`.
pub fn check_admissible(
    s: &Strategy,
    dist: &ReturnDistribution,
) -> std::result::Result<AdmissibleStrategy, AdmissibilityReport> {
    let mut violations = Vec::new();
    match s {
        Strategy::Markowitz(m) => {
            if !m.gain.is_finite() {
                violations.push(Violation::NotFinite { parameter: "K" });
            } else {
                check_gain(m.gain, dist, &mut violations);
                if m.cash_financed && m.gain.abs() > 1.0 + DRAWDOWN_TOLERANCE {
                    violations.push(Violation::CashFinancing {
                        leverage: m.gain.abs(),
                    });
                }
            }
        }
        Strategy::Modulated(m) => {
            if !m.gamma.is_finite() {
                violations.push(Violation::NotFinite { parameter: "gamma" });
            }
            if !(m.d_max > 0.0 && m.d_max < 1.0) {
                violations.push(Violation::DrawdownLimit { d_max: m.d_max });
            }
            if violations.is_empty() {
                check_gain(m.gamma, dist, &mut violations);
                let leverage = m.gamma.abs() * m.d_max;
                if m.cash_financed && leverage > 1.0 + DRAWDOWN_TOLERANCE {
                    violations.push(Violation::CashFinancing { leverage });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(AdmissibleStrategy(*s))
    } else {
        Err(AdmissibilityReport {
            strategy: *s,
            violations,
        })
    }
}

/// [`check_admissible`] mapped into the crate error type.
pub fn require_admissible(s: &Strategy, dist: &ReturnDistribution) -> Result<AdmissibleStrategy> {
    check_admissible(s, dist).map_err(Error::Inadmissible)
}
