use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use ddlab_core::engine::{self, LaneMoments};
use ddlab_core::expectation::exact_estimate;
use ddlab_core::frontier::linspace;
use ddlab_core::return_model::{path_stream, sample_path};
use ddlab_core::simulator::run_path;
use ddlab_core::{
    make_coin, CoinSpec, MarkowitzStrategy, ModulatedStrategy, SimulationConfig, Strategy,
};

fn run_path_252(c: &mut Criterion) {
    let dist = make_coin(CoinSpec::even_money(1.0 / 30.0, 0.6)).unwrap();
    let cfg = SimulationConfig::new(1.0, 252).unwrap();
    let returns = sample_path(&dist, 252, &mut path_stream(1, 0)).unwrap();
    let mut group = c.benchmark_group("run_path");
    group.throughput(Throughput::Elements(252));
    for (name, s) in [
        ("markowitz", Strategy::from(MarkowitzStrategy::new(0.6))),
        ("modulated", ModulatedStrategy::new(4.0, 0.25).into()),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| run_path(black_box(&s), &cfg, black_box(&returns), false).unwrap())
        });
    }
    group.finish();
}

fn mc_lanes(c: &mut Criterion) {
    let dist = make_coin(CoinSpec::even_money(1.0 / 30.0, 0.6)).unwrap();
    let mut group = c.benchmark_group("mc_kernel");
    group.sample_size(10);
    for lanes in [1usize, 64, 1024] {
        let strategies: Vec<Strategy> = linspace(0.1, 4.0, lanes)
            .into_iter()
            .map(|g| ModulatedStrategy::new(g, 0.25).into())
            .collect();
        let paths = 2048u64;
        group.throughput(Throughput::Elements(paths * 252 * lanes as u64));
        group.bench_with_input(BenchmarkId::from_parameter(lanes), &strategies, |b, s| {
            b.iter(|| {
                engine::simulate(s, &dist, 252, paths, 9, || LaneMoments::new(s.len(), false))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn enumeration_n12(c: &mut Criterion) {
    let dist = make_coin(CoinSpec::even_money(1.0, 0.6)).unwrap();
    let cfg = SimulationConfig::new(1.0, 12).unwrap();
    let s: Strategy = ModulatedStrategy::new(0.5, 0.3).into();
    c.bench_function("exact_estimate_n12", |b| {
        b.iter(|| exact_estimate(black_box(&s), &dist, &cfg, 1 << 20).unwrap())
    });
}

criterion_group!(benches, run_path_252, mc_lanes, enumeration_n12);
criterion_main!(benches);
