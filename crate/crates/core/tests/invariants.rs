use ddlab_core::expectation::{
    exact_estimate, expected_log_growth, monte_carlo_batch, n2_markowitz_closed_form,
    n2_modulated_closed_form,
};
use ddlab_core::frontier::{maximize_modulated_return, GammaGrid};
use ddlab_core::return_model::{enumerate_paths, DEFAULT_ENUMERATION_CAP};
use ddlab_core::simulator::run_path;
use ddlab_core::strategy::lemma_bounds;
use ddlab_core::{
    make_coin, AccountState, Backend, CoinSpec, FrontierQuery, MarkowitzStrategy,
    ModulatedStrategy, Outcome, ReturnDistribution, SimulationConfig, Strategy,
};
use proptest::prelude::*;

fn three_point() -> ReturnDistribution {
    ReturnDistribution::new(vec![
        Outcome {
            value: -0.5,
            probability: 0.3,
        },
        Outcome {
            value: 0.1,
            probability: 0.3,
        },
        Outcome {
            value: 0.8,
            probability: 0.4,
        },
    ])
    .unwrap()
}

/// Every stage of every path, including short positions and a skewed law.
#[test]
fn drawdown_cap_holds_on_every_enumerated_path() {
    let laws = [
        (make_coin(CoinSpec::even_money(1.0, 0.6)).unwrap(), 12),
        (
            make_coin(CoinSpec::even_money(1.0 / 30.0, 0.6)).unwrap(),
            12,
        ),
        (three_point(), 8),
    ];
    for (dist, n) in &laws {
        let cfg = SimulationConfig::new(1.0, *n).unwrap();
        let g_hi = 1.0 / dist.x_min().abs();
        let g_lo = -1.0 / dist.x_max();
        for d_max in [0.05, 0.3, 0.7, 0.95] {
            for frac in [1.0, 0.5, -0.5, -1.0] {
                let gamma = if frac > 0.0 {
                    frac * g_hi
                } else {
                    -frac * g_lo
                };
                let gamma = gamma.clamp(-1.0 / d_max, 1.0 / d_max);
                let s: Strategy = ModulatedStrategy::new(gamma, d_max).into();
                for (returns, _) in enumerate_paths(dist, *n, DEFAULT_ENUMERATION_CAP).unwrap() {
                    let (stats, rows) = run_path(&s, &cfg, &returns, true).unwrap();
                    assert!(stats.max_pct_drawdown <= d_max + 1e-12);
                    for r in rows.unwrap() {
                        assert!(
                            r.d <= d_max + 1e-12,
                            "gamma {gamma} d_max {d_max} d {}",
                            r.d
                        );
                        if let Some(inv) = r.investment {
                            let state = AccountState::from_values(r.v, r.v_max).unwrap();
                            let b = lemma_bounds(&state, d_max, dist).unwrap();
                            assert!(b.contains(inv, 1e-12));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn enumeration_matches_two_stage_closed_forms() {
    let cfg = SimulationConfig::new(1.0, 2).unwrap();
    for i in 1..20 {
        let p = 0.5 + 0.5 * i as f64 / 20.0;
        let coin = make_coin(CoinSpec::even_money(1.0, p)).unwrap();
        for j in 0..=20 {
            let k = j as f64 / 20.0;
            let e = exact_estimate(&MarkowitzStrategy::new(k).into(), &coin, &cfg, 4).unwrap();
            let (r, d) = n2_markowitz_closed_form(k, p);
            assert!((e.mean_return - r).abs() < 1e-10);
            assert!((e.mean_max_drawdown - d).abs() < 1e-10);
            for d_max in [0.1, 0.5, 0.9] {
                let s = ModulatedStrategy::new(k, d_max).into();
                let e = exact_estimate(&s, &coin, &cfg, 4).unwrap();
                let (r, d) = n2_modulated_closed_form(k, d_max, p);
                assert!(
                    (e.mean_return - r).abs() < 1e-10,
                    "k {k} p {p} d_max {d_max}"
                );
                assert!((e.mean_max_drawdown - d).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let dist = three_point();
    let cfg = SimulationConfig::new(1.0, 6).unwrap();
    let strategies: Vec<Strategy> = vec![
        MarkowitzStrategy::new(0.7).into(),
        MarkowitzStrategy::new(-0.5).into(),
        ModulatedStrategy::new(1.0, 0.4).into(),
        ModulatedStrategy::new(-1.0, 0.2).into(),
    ];
    let mc = monte_carlo_batch(&strategies, &dist, &cfg, 100_000, 42).unwrap();
    for (s, m) in strategies.iter().zip(&mc) {
        let e = exact_estimate(s, &dist, &cfg, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(
            (m.mean_return - e.mean_return).abs() <= 4.0 * m.std_error_return,
            "{s:?}"
        );
        assert!(
            (m.mean_max_drawdown - e.mean_max_drawdown).abs() <= 4.0 * m.std_error_drawdown,
            "{s:?}"
        );
    }
}

#[test]
fn replication_limit_is_monotone() {
    let coin = make_coin(CoinSpec::even_money(1.0, 0.5)).unwrap();
    let cfg = SimulationConfig::new(1.0, 10).unwrap();
    let mk = exact_estimate(&MarkowitzStrategy::new(0.5).into(), &coin, &cfg, 1 << 10).unwrap();
    let gaps: Vec<(f64, f64)> = [0.9, 0.99, 0.999]
        .iter()
        .map(|&d_max| {
            let s = ModulatedStrategy::new(0.5, d_max).into();
            let e = exact_estimate(&s, &coin, &cfg, 1 << 10).unwrap();
            (
                (e.mean_return - mk.mean_return).abs(),
                (e.mean_max_drawdown - mk.mean_max_drawdown).abs(),
            )
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{gaps:?}");
    }
}

#[test]
fn refining_the_grid_never_lowers_the_optimum() {
    let coin = make_coin(CoinSpec::even_money(1.0, 0.6)).unwrap();
    let cfg = SimulationConfig::new(1.0, 4).unwrap();
    let backend = Backend::MonteCarlo {
        paths: 4000,
        seed: 9,
    };
    let coarse_d: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let fine_d: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let query = |gamma_grid: GammaGrid, dmax_grid: Vec<f64>| FrontierQuery {
        target_drawdown: 0.2,
        tolerance: 0.02,
        gamma_grid,
        dmax_grid,
        backend,
        cash_financed: true,
    };
    let coarse =
        maximize_modulated_return(&query(GammaGrid::Span { points: 5 }, coarse_d), &coin, &cfg)
            .unwrap();
    // Span with 9 points contains every point of the 5-point span.
    let fine =
        maximize_modulated_return(&query(GammaGrid::Span { points: 9 }, fine_d), &coin, &cfg)
            .unwrap();
    assert!(fine.best.estimate.mean_return >= coarse.best.estimate.mean_return);
    for p in &fine.evaluated {
        if let Strategy::Modulated(m) = p.params {
            assert!(p.estimate.mean_max_drawdown <= m.d_max + 1e-12);
        }
    }
}

#[test]
fn log_growth_guards_ruin() {
    let coin = make_coin(CoinSpec::even_money(1.0, 0.6)).unwrap();
    let cfg = SimulationConfig::new(1.0, 3).unwrap();
    let ruinous = MarkowitzStrategy::new(1.0).into();
    assert!(expected_log_growth(&ruinous, &coin, &cfg, Backend::exact()).is_err());
    let safe = ModulatedStrategy::new(1.0, 0.5).into();
    assert!(expected_log_growth(&safe, &coin, &cfg, Backend::exact())
        .unwrap()
        .is_finite());
}

proptest! {
    #[test]
    fn markowitz_final_value_is_a_product(
        k in 0.0f64..1.0,
        xs in prop::collection::vec(prop::sample::select(vec![-1.0, 1.0]), 1..40),
    ) {
        let cfg = SimulationConfig::new(2.5, xs.len()).unwrap();
        let (stats, _) = run_path(&MarkowitzStrategy::new(k).into(), &cfg, &xs, false).unwrap();
        let want: f64 = xs.iter().fold(2.5, |v, x| v * (1.0 + k * x));
        prop_assert!((stats.final_value - want).abs() <= 1e-10 * want.abs().max(1e-300));
        prop_assert!((0.0..=1.0).contains(&stats.max_pct_drawdown));
        prop_assert!(stats.max_abs_drawdown >= 0.0);
    }

    #[test]
    fn modulated_paths_stay_under_the_cap(
        frac in -1.0f64..1.0,
        d_max in 0.01f64..0.99,
        xs in prop::collection::vec(-0.5f64..0.8, 1..60),
    ) {
        // Survival bounds for returns in [-0.5, 0.8].
        let gamma = if frac >= 0.0 { frac / 0.5 } else { frac / 0.8 };
        let s = ModulatedStrategy { gamma, d_max, cash_financed: false }.into();
        let cfg = SimulationConfig::new(1.0, xs.len()).unwrap();
        let (_, rows) = run_path(&s, &cfg, &xs, true).unwrap();
        for r in rows.unwrap() {
            prop_assert!(r.d <= d_max + 1e-12);
        }
    }

    #[test]
    fn run_path_is_deterministic(
        gamma in 0.0f64..1.0,
        d_max in 0.05f64..0.95,
        xs in prop::collection::vec(prop::sample::select(vec![-1.0, 1.0]), 1..30),
    ) {
        let s = ModulatedStrategy::new(gamma, d_max).into();
        let cfg = SimulationConfig::new(1.0, xs.len()).unwrap();
        let a = run_path(&s, &cfg, &xs, true).unwrap();
        let b = run_path(&s, &cfg, &xs, true).unwrap();
        prop_assert_eq!(a, b);
    }
}
