use criterion::{black_box, criterion_group, criterion_main, Criterion};
use flownet::data;
use flownet::gas::{build_lp1, solve_lp2, BreakpointGrid};
use flownet::lp::MplpLimits;
use flownet::traffic::{centralized_action, decentralized_onehop_action, synthesize_explicit};
use flownet::{solve_lp, InflowProfile};
use flownet_bench::{example1_lp, synthetic32_setup};

fn traffic(c: &mut Criterion) {
    let lp = example1_lp(10);
    let x0 = data::EXAMPLE1_X0;
    c.bench_function("example1_horizon10_lp", |b| {
        b.iter(|| solve_lp(black_box(&lp.instantiate(&x0))).unwrap())
    });

    let net = data::example1();
    let cost = data::example1_cost(2);
    c.bench_function("example1_explicit_synthesis_n2", |b| {
        b.iter(|| synthesize_explicit(&net, &cost, &InflowProfile::zero(), &MplpLimits::default()).unwrap())
    });

    let (net, cost, x0) = synthetic32_setup(20);
    let mut group = c.benchmark_group("synthetic32");
    group.sample_size(20);
    group.bench_function("centralized_action", |b| {
        b.iter(|| centralized_action(&net, &cost, 0, black_box(&x0), &InflowProfile::zero()).unwrap())
    });
    group.bench_function("decentralized_action", |b| {
        b.iter(|| decentralized_onehop_action(&net, &cost, 0, black_box(&x0)).unwrap())
    });
    group.finish();
}

fn gas(c: &mut Criterion) {
    let gas = data::gas4();
    let x = gas.initial_pressure.clone();
    c.bench_function("gas4_lp1", |b| b.iter(|| build_lp1(&gas, 0).unwrap().solve(black_box(&x)).unwrap()));
    for m in [5, 17] {
        let grid = BreakpointGrid::uniform(m);
        c.bench_function(&format!("gas4_lp2_m{m}"), |b| {
            b.iter(|| solve_lp2(&gas, 0, black_box(&x), &grid).unwrap())
        });
    }
}

criterion_group!(benches, traffic, gas);
criterion_main!(benches);
