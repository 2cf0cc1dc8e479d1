//! Two-stage algebra checks: closed forms against path enumeration, the
//! matching `d_max`, and the factored domination gap.

use ddlab_core::expectation::{
    exact_estimate, matching_dmax, n2_domination_gap, n2_markowitz_closed_form,
    n2_modulated_closed_form,
};
use ddlab_core::{
    make_coin, CoinSpec, MarkowitzStrategy, ModulatedStrategy, SimulationConfig, Strategy,
};
use rayon::prelude::*;
use serde::Serialize;

/// Closed form vs enumeration.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
/// Factored gap vs difference of closed forms.
pub const GAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointCheck {
    pub k: f64,
    pub p: f64,
    pub matching_dmax: f64,
    pub gap: f64,
    /// Largest |closed form - enumeration| over both strategies and both metrics.
    pub enumeration_deviation: f64,
    /// |d̄*_M - d̄*_K| at the matching `d_max`.
    pub drawdown_match_deviation: f64,
    /// |factored gap - (R̄_M - R̄_K)|.
    pub gap_deviation: f64,
}

impl PointCheck {
    pub fn failures(&self) -> Vec<&'static str> {
        // NaN deviations must fail, hence `!within` rather than `>`.
        let within = |dev: f64, tol: f64| dev <= tol;
        let positive = |x: f64| x > 0.0;
        let mut out = Vec::new();
        if !within(self.enumeration_deviation, IDENTITY_TOLERANCE) {
            out.push("closed form disagrees with enumeration");
        }
        if !within(self.drawdown_match_deviation, IDENTITY_TOLERANCE) {
            out.push("matching d_max does not equalize drawdown");
        }
        if !(self.matching_dmax > 0.0 && self.matching_dmax < 1.0) {
            out.push("matching d_max outside (0, 1)");
        }
        if !within(self.gap_deviation, GAP_TOLERANCE) {
            out.push("factored gap disagrees with closed-form difference");
        }
        if !positive(self.gap) {
            out.push("gap not strictly positive");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub point: PointCheck,
    pub reasons: Vec<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub points: usize,
    pub identity_tolerance: f64,
    pub gap_tolerance: f64,
    pub max_enumeration_deviation: f64,
    pub max_drawdown_match_deviation: f64,
    pub max_gap_deviation: f64,
    pub min_gap: f64,
    pub passed: bool,
    pub failures: Vec<Failure>,
}

pub fn check_point(k: f64, p: f64) -> ddlab_core::Result<PointCheck> {
    let cfg = SimulationConfig::new(1.0, 2)?;
    let coin = make_coin(CoinSpec::even_money(1.0, p))?;
    let d_max = matching_dmax(k, p);

    let (rk, dk) = n2_markowitz_closed_form(k, p);
    let (rm, dm) = n2_modulated_closed_form(1.0, d_max, p);
    let ek = exact_estimate(&Strategy::from(MarkowitzStrategy::new(k)), &coin, &cfg, 4)?;
    // Outside (0, 1) the modulator is undefined; the range failure reports it.
    let em = if d_max > 0.0 && d_max < 1.0 {
        Some(exact_estimate(
            &ModulatedStrategy::new(1.0, d_max).into(),
            &coin,
            &cfg,
            4,
        )?)
    } else {
        None
    };

    let mut enumeration_deviation = (ek.mean_return - rk)
        .abs()
        .max((ek.mean_max_drawdown - dk).abs());
    match em {
        Some(em) => {
            enumeration_deviation = enumeration_deviation
                .max((em.mean_return - rm).abs())
                .max((em.mean_max_drawdown - dm).abs());
        }
        None => enumeration_deviation = f64::NAN,
    }
    let gap = n2_domination_gap(k, p);
    Ok(PointCheck {
        k,
        p,
        matching_dmax: d_max,
        gap,
        enumeration_deviation,
        drawdown_match_deviation: (dm - dk).abs(),
        gap_deviation: (gap - (rm - rk)).abs(),
    })
}

/// Checks every `(K, p)` pair; points are reported in row-major `K` order.
pub fn verify_grid(k_grid: &[f64], p_grid: &[f64]) -> ddlab_core::Result<VerificationReport> {
    let pairs: Vec<(f64, f64)> = k_grid
        .iter()
        .flat_map(|&k| p_grid.iter().map(move |&p| (k, p)))
        .collect();
    let checks = pairs
        .par_iter()
        .map(|&(k, p)| check_point(k, p))
        .collect::<ddlab_core::Result<Vec<_>>>()?;

    let max = |f: fn(&PointCheck) -> f64| checks.iter().map(f).fold(0.0, f64::max);
    let failures: Vec<Failure> = checks
        .iter()
        .filter_map(|c| {
            let reasons = c.failures();
            (!reasons.is_empty()).then_some(Failure { point: *c, reasons })
        })
        .collect();
    Ok(VerificationReport {
        points: checks.len(),
        identity_tolerance: IDENTITY_TOLERANCE,
        gap_tolerance: GAP_TOLERANCE,
        max_enumeration_deviation: max(|c| c.enumeration_deviation),
        max_drawdown_match_deviation: max(|c| c.drawdown_match_deviation),
        max_gap_deviation: max(|c| c.gap_deviation),
        min_gap: checks.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min),
        passed: failures.is_empty(),
        failures,
    })
}
