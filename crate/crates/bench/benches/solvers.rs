use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use doseopt::maximin::reference_designs;
use doseopt::*;
use doseopt_bench::{rat_design, simulation_spec, RATES};

fn local_designs(c: &mut Criterion) {
    let mut group = c.benchmark_group("local");
    for b in RATES {
        for (model, target) in [(ModelId::ExpPow, Param::D), (ModelId::Full, Param::C)] {
            let problem = LocalDesignProblem::new(model, Theta::nominal(b), target, 1.0);
            group.bench_with_input(
                BenchmarkId::new(format!("{model}/{target}"), b),
                &problem,
                |bench, p| bench.iter(|| solve_local(p).unwrap()),
            );
        }
    }
    group.finish();
}

fn maximin_design(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximin");
    group.sample_size(10);
    let cfg = OptimizerConfig::default();
    let problem = MaximinProblem::nominal(1.0, 1.0);
    reference_designs(&problem, &cfg).unwrap();
    group.bench_function("b=1", |bench| {
        bench.iter(|| solve_maximin(&problem, &cfg).unwrap())
    });
    let refs = reference_designs(&problem, &cfg).unwrap();
    let design = ContinuousDesign::uniform(vec![0.0, 0.2, 0.5, 1.0], 1.0).unwrap();
    group.bench_function("objective", |bench| {
        bench.iter(|| maximin_objective(&design, &problem, &refs))
    });
    group.finish();
}

fn d_optimal(c: &mut Criterion) {
    let mut group = c.benchmark_group("doptimal");
    group.sample_size(10);
    let cfg = OptimizerConfig::default();
    for model in [ModelId::Exp, ModelId::Full] {
        group.bench_function(model.label(), |bench| {
            bench.iter(|| solve_d_optimal(model, &Theta::nominal(1.0), 1.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    let design = rat_design();
    for model in [ModelId::ExpPow, ModelId::Full] {
        let spec = simulation_spec(100, model);
        group.bench_function(format!("{model}/100 reps"), |bench| {
            bench.iter(|| simulate_fit(&design, &spec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    local_designs,
    maximin_design,
    d_optimal,
    simulation
);
criterion_main!(benches);
