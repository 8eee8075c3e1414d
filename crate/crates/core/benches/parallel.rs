use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use skl_core::harness::{run_experiment, ExperimentConfig};
use skl_core::kernels::{gram_matrix_with, InnerProductKernel};
use skl_core::par::Execution;
use skl_core::sphere::{sample_uniform, SphereDim};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn gram(c: &mut Criterion) {
    let mut g = c.benchmark_group("gram_assembly");
    let kernel = InnerProductKernel::ntk();
    for n in [500usize, 1500] {
        let x = sample_uniform(SphereDim::new(30).unwrap(), n, 1);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &x, |b, x| {
                b.iter(|| gram_matrix_with(&kernel, x, exec))
            });
        }
    }
    g.finish();
}

fn trials(c: &mut Criterion) {
    let cfg = ExperimentConfig::from_json(
        r#"{
          "kernel": {"name": "rbf"},
          "algorithms": [
            {"filter": {"name": "gradient_flow"},
             "tuning": {"rule": "stopping_time", "c1": [0.0, 0.1, 1.0, 10.0]}},
            {"filter": {"name": "krr"}, "tuning": {"rule": "fixed", "c": 0.05, "theta": 0.5}}
          ],
          "target": {"type": "kernel_sections"},
          "gamma": 1.5,
          "d_list": [10, 20, 30],
          "repeats": 8,
          "test_size": 500,
          "master_seed": 1
        }"#,
    )
    .unwrap();
    let mut g = c.benchmark_group("trial_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| run_experiment(&cfg, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gram, trials);
criterion_main!(benches);
