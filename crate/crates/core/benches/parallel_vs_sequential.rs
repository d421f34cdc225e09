use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hcpfactor::cost::{sweep_with, Algorithm};
use hcpfactor::exec::Exec;
use hcpfactor::platform::Platform;
use hcpfactor::schedule::BlockSchedule;
use hcpfactor::stability::{ratio_study_with, Generator, StudyConfig};

fn stability(c: &mut Criterion) {
    let cfg = StudyConfig {
        n: 128,
        schedule: BlockSchedule::new(vec![4, 8, 16]).unwrap(),
        ..StudyConfig::desk()
    };
    let gens = Generator::standard();
    let mut g = c.benchmark_group("ratio_study_n128");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| ratio_study_with(black_box(&gens), &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn model_sweep(c: &mut Criterion) {
    let ex = Platform::exascale();
    let ns: Vec<usize> = (12..=20).map(|k| 1 << k).collect();
    let tops = [256, 1024, 4096, 32768];
    let mut g = c.benchmark_group("mlcaqr_sweep_exascale");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| sweep_with(Algorithm::Mlcaqr, &ex, black_box(&ns), &tops, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stability, model_sweep);
criterion_main!(benches);
