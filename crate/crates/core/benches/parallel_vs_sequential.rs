use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spoga::arch::ArchConfig;
use spoga::mapper::{execute_plan, plan, ExecOptions, GemmJob};
use spoga::par::Parallelism;
use spoga::verify::{dpu_sweep, VerifyConfig};

const MODES: [(&str, Parallelism); 2] = [("parallel", Parallelism::Parallel), ("sequential", Parallelism::Sequential)];

fn functional_gemm(c: &mut Criterion) {
    let arch = ArchConfig::from_selector("SPOGA_10").unwrap();
    let job = GemmJob::new(196, 576, 64).unwrap().with_synthetic(1);
    let p = plan(&job, &arch);
    let mut g = c.benchmark_group("functional_gemm_196x576x64");
    g.sample_size(10);
    for (name, parallelism) in MODES {
        let opts = ExecOptions {
            parallelism,
            ..ExecOptions::functional()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, o| {
            b.iter(|| execute_plan(&p, &job, &arch, o).unwrap())
        });
    }
    g.finish();
}

fn oracle_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("dpu_sweep_2000");
    g.sample_size(10);
    for (name, parallelism) in MODES {
        let cfg = VerifyConfig {
            trials: 2000,
            parallelism,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| b.iter(|| dpu_sweep(cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, functional_gemm, oracle_sweep);
criterion_main!(benches);
