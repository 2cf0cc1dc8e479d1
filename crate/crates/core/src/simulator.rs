//! Account evolution `V(k+1) = V(k) + I(k) X(k)` and per-path statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::{AccountState, Strategy};

/// Initial capital and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub v0: f64,
    pub n: usize,
}

impl SimulationConfig {
    pub fn new(v0: f64, n: usize) -> Result<Self> {
        let cfg = SimulationConfig { v0, n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(Error::InvalidInitialValue(self.v0));
        }
        if self.n == 0 {
            return Err(Error::EmptyHorizon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathStats {
    pub overall_return: f64,
    pub max_pct_drawdown: f64,
    pub max_abs_drawdown: f64,
    /// `ln(V(N)/V(0))`; `-inf` after bankruptcy.
    pub log_growth: f64,
    pub final_value: f64,
}

/// One row of a recorded trajectory. `investment` and `realized_return` are
/// absent on the terminal row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub v: f64,
    pub v_max: f64,
    pub d: f64,
    pub investment: Option<f64>,
    pub realized_return: Option<f64>,
}

/// Applies one stage of the wealth recursion.
///
/// A value within `1e-12 * v_max` below zero is treated as exact ruin and
/// clamped to 0; anything lower is a bankruptcy error.
pub fn step(state: &AccountState, investment: f64, x: f64) -> Result<AccountState> {
    let mut v = state.v + investment * x;
    if v < 0.0 {
        if v < -1e-12 * state.v_max {
            return Err(Error::Bankruptcy { stage: 0, value: v });
        }
        v = 0.0;
    }
    if !v.is_finite() {
        return Err(Error::InvalidState(format!("non-finite account value {v}")));
    }
    if v >= state.v_max {
        return Ok(AccountState {
            v,
            v_max: v,
            d: 0.0,
        });
    }
    Ok(AccountState {
        v,
        v_max: state.v_max,
        d: (state.v_max - v) / state.v_max,
    })
}

/// Runs `strategy` along `returns`, optionally recording every stage.
pub fn run_path(
    strategy: &Strategy,
    cfg: &SimulationConfig,
    returns: &[f64],
    record: bool,
) -> Result<(PathStats, Option<Vec<TrajectoryRow>>)> {
    cfg.validate()?;
    if returns.len() != cfg.n {
        return Err(Error::HorizonMismatch {
            expected: cfg.n,
            got: returns.len(),
        });
    }
    let mut state = AccountState::initial(cfg.v0)?;
    let mut max_pct: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut rows = record.then(|| Vec::with_capacity(cfg.n + 1));

    for (k, &x) in returns.iter().enumerate() {
        // a ruined account stays frozen at zero
        let investment = if state.v == 0.0 {
            0.0
        } else {
            strategy.investment(&state)?
        };
        if let Some(rows) = rows.as_mut() {
            rows.push(TrajectoryRow {
                k,
                v: state.v,
                v_max: state.v_max,
                d: state.d,
                investment: Some(investment),
                realized_return: Some(x),
            });
        }
        state = step(&state, investment, x).map_err(|e| match e {
            Error::Bankruptcy { value, .. } => Error::Bankruptcy {
                stage: k + 1,
                value,
            },
            other => other,
        })?;
        max_pct = max_pct.max(state.d);
        max_abs = max_abs.max(state.v_max - state.v);
    }
    if let Some(rows) = rows.as_mut() {
        rows.push(TrajectoryRow {
            k: cfg.n,
            v: state.v,
            v_max: state.v_max,
            d: state.d,
            investment: None,
            realized_return: None,
        });
    }

    let stats = PathStats {
        overall_return: state.v / cfg.v0 - 1.0,
        max_pct_drawdown: max_pct,
        max_abs_drawdown: max_abs,
        log_growth: (state.v / cfg.v0).ln(),
        final_value: state.v,
    };
    Ok((stats, rows))
}

fn check_series(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidSeries(format!(
            "value {bad} is not a finite nonnegative number"
        )));
    }
    if values[0] == 0.0 {
        return Err(Error::InvalidSeries("series must start above zero".into()));
    }
    Ok(())
}

/// `max_k (V_max(k) - V(k)) / V_max(k)` over a value series.
pub fn max_percentage_drawdown(values: &[f64]) -> Result<f64> {
    check_series(values)?;
    let mut peak = values[0];
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

/// `max_k (V_max(k) - V(k))` over a value series.
pub fn max_absolute_drawdown(values: &[f64]) -> Result<f64> {
    check_series(values)?;
    let mut peak = values[0];
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max(peak - v);
    }
    Ok(worst)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes a trajectory as CSV with header `k,V,V_max,d,I,X`.
pub fn write_trajectory_csv<W: Write>(mut out: W, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    writeln!(out, "k,V,V_max,d,I,X")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.v,
            r.v_max,
            r.d,
            opt(r.investment),
            opt(r.realized_return)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{MarkowitzStrategy, ModulatedStrategy};

    fn s(v: f64, v_max: f64) -> AccountState {
        AccountState::from_values(v, v_max).unwrap()
    }

    #[test]
    fn step_examples() {
        let up = step(&s(100.0, 100.0), 20.0, 1.0).unwrap();
        assert_eq!(
            up,
            AccountState {
                v: 120.0,
                v_max: 120.0,
                d: 0.0
            }
        );
        let down = step(&s(100.0, 100.0), 20.0, -1.0).unwrap();
        assert_eq!((down.v, down.v_max), (80.0, 100.0));
        assert!((down.d - 0.2).abs() < 1e-15);
        let idle = s(80.0, 100.0);
        assert_eq!(step(&idle, 0.0, -0.7).unwrap(), idle);
    }

    #[test]
    fn step_detects_bankruptcy() {
        assert!(matches!(
            step(&s(100.0, 100.0), 150.0, -1.0),
            Err(Error::Bankruptcy { .. })
        ));
        let ruined = step(&s(100.0, 100.0), 100.0, -1.0).unwrap();
        assert_eq!((ruined.v, ruined.d), (0.0, 1.0));
    }

    #[test]
    fn markowitz_constant_returns_closed_form() {
        let cfg = SimulationConfig::new(3.0, 25).unwrap();
        let strat = MarkowitzStrategy::new(0.3).into();
        let (stats, _) = run_path(&strat, &cfg, &[0.04; 25], false).unwrap();
        let expected = 3.0 * (1.0f64 + 0.3 * 0.04).powi(25);
        assert!((stats.final_value - expected).abs() <= 1e-10 * expected);
        assert_eq!(stats.max_pct_drawdown, 0.0);
    }

    #[test]
    fn modulated_hand_trace() {
        let cfg = SimulationConfig::new(1.0, 2).unwrap();
        let strat = ModulatedStrategy::new(1.0, 0.5).into();
        let (stats, rows) = run_path(&strat, &cfg, &[1.0, -1.0], true).unwrap();
        let rows = rows.unwrap();
        assert_eq!(
            rows.iter().map(|r| r.v).collect::<Vec<_>>(),
            vec![1.0, 1.5, 0.75]
        );
        assert_eq!(rows[0].investment, Some(0.5));
        assert_eq!(rows[1].investment, Some(0.75));
        assert_eq!(rows[2].investment, None);
        assert_eq!(stats.max_pct_drawdown, 0.5);
        assert_eq!(stats.max_abs_drawdown, 0.75);
        assert!((stats.overall_return + 0.25).abs() < 1e-15);
    }

    #[test]
    fn ruin_freezes_account() {
        let cfg = SimulationConfig::new(1.0, 4).unwrap();
        let strat = MarkowitzStrategy::new(1.0).into();
        let (stats, rows) = run_path(&strat, &cfg, &[1.0, -1.0, 1.0, 1.0], true).unwrap();
        assert_eq!(stats.final_value, 0.0);
        assert_eq!(stats.max_pct_drawdown, 1.0);
        assert_eq!(stats.log_growth, f64::NEG_INFINITY);
        assert!(rows.unwrap()[2..].iter().all(|r| r.v == 0.0 && r.d == 1.0));
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let cfg = SimulationConfig::new(1.0, 3).unwrap();
        let strat = MarkowitzStrategy::new(0.1).into();
        assert!(matches!(
            run_path(&strat, &cfg, &[0.1, 0.2], false),
            Err(Error::HorizonMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(SimulationConfig::new(0.0, 3).is_err());
        assert!(SimulationConfig::new(1.0, 0).is_err());
    }

    #[test]
    fn series_drawdown_examples() {
        assert_eq!(max_percentage_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((max_percentage_drawdown(&[3.0, 0.5]).unwrap() - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(max_percentage_drawdown(&[1.0, 0.5, 2.0, 1.0]).unwrap(), 0.5);
        assert_eq!(max_absolute_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(max_absolute_drawdown(&[5.0, 0.5]).unwrap(), 4.5);
        assert_eq!(max_absolute_drawdown(&[1.0, 0.5, 2.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(
            max_percentage_drawdown(&[]),
            Err(Error::EmptySeries)
        ));
        assert!(matches!(
            max_absolute_drawdown(&[]),
            Err(Error::EmptySeries)
        ));
        assert_eq!(max_percentage_drawdown(&[2.0, 1.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn trajectory_csv_layout() {
        let cfg = SimulationConfig::new(1.0, 1).unwrap();
        let strat = MarkowitzStrategy::new(0.5).into();
        let (_, rows) = run_path(&strat, &cfg, &[-1.0], true).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows.unwrap()).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,V,V_max,d,I,X\n0,1,1,0,0.5,-1\n1,0.5,1,0.5,,\n"
        );
    }
}
