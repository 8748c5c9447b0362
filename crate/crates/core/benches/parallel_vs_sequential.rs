use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tmcmc::diagnostics::scaling::{run_scaling_study, ScalingStudySpec};
use tmcmc::targets::IidGaussian;
use tmcmc::tmcmc::{AdditiveTmcmc, TmcmcConfig};
use tmcmc::{run_chains, Execution, Record, RunOptions};

fn label(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn scaling_grid(c: &mut Criterion) {
    let spec = ScalingStudySpec {
        dims: vec![10, 30],
        ell_grid: vec![1.5, 2.4, 3.3],
        n_iter: 5_000,
        burn_in: 500,
        seeds: vec![1, 2],
        tracked_coords: 5,
        timing: false,
        ..ScalingStudySpec::default()
    };
    let mut g = c.benchmark_group("scaling_grid");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(label(exec)), &exec, |b, &exec| {
            b.iter(|| run_scaling_study(&spec, exec).unwrap())
        });
    }
    g.finish();
}

fn multi_chain(c: &mut Criterion) {
    let k = 50;
    let target = IidGaussian::new(k).unwrap();
    let kernel = AdditiveTmcmc::new(TmcmcConfig::symmetric(k, 2.4 / (k as f64).sqrt())).unwrap();
    let opts = RunOptions::new(20_000).record(Record::First(2));
    let mut g = c.benchmark_group("multi_chain");
    g.sample_size(10);
    for chains in [4usize, 16] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let id = BenchmarkId::new(label(exec), chains);
            g.bench_with_input(id, &(chains, exec), |b, &(chains, exec)| {
                b.iter(|| {
                    let starts = vec![vec![0.0; k]; chains];
                    run_chains(&kernel, &target, starts, opts, 7, exec).unwrap()
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, scaling_grid, multi_chain);
criterion_main!(benches);
