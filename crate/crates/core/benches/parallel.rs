use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gfe_core::exponents::{exponent_suite, Method, SuiteOptions, WindowPlan};
use gfe_core::integrator::{integrate, Tolerances};
use gfe_core::orbit::{detect_period, OrbitOptions};
use gfe_core::portrait::{build_portrait, hidden_structure_compare, PortraitOptions, PortraitPlan};
use gfe_core::{lookup_system, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn suite_windows(c: &mut Criterion) {
    let s = lookup_system("silnikov", &[("b".into(), 0.314)]).unwrap();
    let plan = WindowPlan::new(5.0, 16).with_transient(50.0);
    let mut group = c.benchmark_group("exponent_suite");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = SuiteOptions { execution, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| exponent_suite(&s, &s.default_seed(), &plan, &Method::ALL, opts).unwrap())
        });
    }
    group.finish();
}

fn portrait_samples(c: &mut Criterion) {
    let l = lookup_system("lorenz", &[]).unwrap();
    let plan = PortraitPlan::new(0.4, 500).with_transient(20.0);
    let mut group = c.benchmark_group("build_portrait");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = PortraitOptions { execution, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| build_portrait(&l, &l.default_seed(), &plan, opts).unwrap())
        });
    }
    group.finish();
}

fn compare_shifts(c: &mut Criterion) {
    let v = lookup_system("vanderpol", &[]).unwrap();
    let tol = Tolerances::default();
    let d = detect_period(&v, &v.default_seed(), &OrbitOptions { transient: 100.0, ..Default::default() }).unwrap();
    let (t0, p) = (d.reference_time, d.period.unwrap());
    let periodic = integrate(&v, &d.reference, t0, t0 + p, &tol).unwrap();
    let long = integrate(&v, &d.reference, t0, t0 + 100.0, &tol).unwrap();
    let mut group = c.benchmark_group("hidden_structure_compare");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &ex| {
            b.iter(|| hidden_structure_compare(&long, &periodic, 0, p, ex).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, suite_windows, portrait_samples, compare_shifts);
criterion_main!(benches);
