use std::hint::black_box;
use std::time::Duration;

use criterion::{BenchmarkId, Criterion};
use mbsim_bench::{finite_instance, profiles, uniform_market};
use mbsim_core::ironing::{build_curve, iron};
use mbsim_core::matching::{max_weight_matching, vcg};
use mbsim_core::rng::{TrialStreams, LANE_COINS};
use mbsim_core::{optimal_utility, run_trials, DistributionSpec, MechanismId};

fn bench_matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("matching");
    for (n, m) in [(4, 4), (8, 8), (16, 8), (32, 32)] {
        let ps = profiles(n, m, 64);
        group.bench_with_input(BenchmarkId::new("max_weight", format!("{n}x{m}")), &ps, |b, ps| {
            b.iter(|| ps.iter().map(|p| max_weight_matching(black_box(p)).total_weight).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("vcg", format!("{n}x{m}")), &ps, |b, ps| {
            b.iter(|| ps.iter().map(|p| vcg(black_box(p)).payments.as_slice().iter().sum::<f64>()).sum::<f64>())
        });
    }
    group.finish();
}

fn bench_mechanisms(c: &mut Criterion) {
    let mut group = c.benchmark_group("mechanism");
    let ps = profiles(16, 8, 64);
    for id in [
        MechanismId::RandomFavorites,
        MechanismId::PriorFreeFavorites,
        MechanismId::VickreyFavorites,
        MechanismId::IterativeRandomFavorites,
        MechanismId::CopiesVickrey,
    ] {
        group.bench_function(id.name(), |b| {
            let mut rng = TrialStreams::new(1).stream(LANE_COINS, 0);
            b.iter(|| {
                for p in &ps {
                    black_box(id.run(p, &mut rng).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let market = uniform_market(10, 10, 10_000);
    let mechanisms = [MechanismId::RandomFavorites, MechanismId::VcgUnitDemand];
    c.bench_function("run_trials/10x10/10k", |b| b.iter(|| run_trials(black_box(&market), &mechanisms).unwrap()));
}

fn bench_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimal_lp");
    for (n, m, types) in [(2, 2, 2), (2, 2, 4), (3, 2, 3)] {
        let inst = finite_instance(n, m, types);
        group.bench_function(format!("n{n}_m{m}_t{types}"), |b| {
            b.iter(|| optimal_utility(black_box(&inst), false).unwrap().objective)
        });
    }
    group.finish();
}

fn bench_ironing(c: &mut Criterion) {
    let spec: DistributionSpec = "pareto:2,1".parse().unwrap();
    let curve = build_curve(&spec, 4096).unwrap();
    c.bench_function("iron/pareto/4096", |b| b.iter(|| iron(black_box(&curve)).unwrap()));
}

fn main() {
    let mut c = Criterion::default()
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2))
        .configure_from_args();

    bench_matching(&mut c);
    bench_mechanisms(&mut c);
    bench_simulation(&mut c);
    bench_lp(&mut c);
    bench_ironing(&mut c);

    c.final_summary();
}
