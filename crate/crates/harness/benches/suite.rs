use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qstop_harness::{bundled_dir, run_truncation_sweep, run_verify, Execution, Scenario};

fn scenario(name: &str) -> Scenario {
    Scenario::load(&bundled_dir().join(format!("{name}.toml"))).expect("bundled scenario")
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn main_theorem(c: &mut Criterion) {
    let mut s = scenario("main-theorem").with_checks(&["main_theorem"]).unwrap();
    s.instances = 8;
    let mut group = c.benchmark_group("main_theorem_8");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_verify(&s, exec).unwrap())
        });
    }
    group.finish();
}

fn deterministic_suite(c: &mut Criterion) {
    let s = scenario("deterministic");
    let mut group = c.benchmark_group("deterministic_all_checks");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_verify(&s, exec).unwrap())
        });
    }
    group.finish();
}

fn truncation_sweep(c: &mut Criterion) {
    let s = scenario("sweep");
    let caps = s.file.sweep.caps.clone();
    let mut group = c.benchmark_group("truncation_sweep");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_truncation_sweep(&s, &caps, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, main_theorem, deterministic_suite, truncation_sweep);
criterion_main!(benches);
