//! Sequential versus rayon execution of the right-hand side, one integrator
//! step, and a small eps sweep.

use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twophase::experiment::{parse_config, run_sweep};
use twophase::generators::Generator;
use twophase::grid::PeriodicGrid;
use twophase::integrator::{step, StepConfig};
use twophase::model::{rhs_regularized, ModelParams, State};
use twophase::par::{set_exec, Exec};

const MODES: [(Exec, &str); 2] = [(Exec::Sequential, "sequential"), (Exec::Parallel, "parallel")];

fn state(dim: usize, n: usize) -> State {
    let g = PeriodicGrid::new(dim, n).unwrap();
    Generator::RandomSmooth { cutoff: 4, amplitude: 0.3 }
        .build(g, 1, 0.01)
        .unwrap()
        .to_state()
        .unwrap()
}

fn bench_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    group.sample_size(20);
    for (dim, n) in [(2usize, 128usize), (2, 256), (3, 48)] {
        let s = state(dim, n);
        for eps in [0.0, 0.01] {
            let p = ModelParams { eps, ..Default::default() };
            for (exec, label) in MODES {
                set_exec(exec);
                let id = BenchmarkId::new(format!("{label}/eps={eps}"), format!("d{dim}n{n}"));
                group.bench_with_input(id, &s, |b, s| b.iter(|| rhs_regularized(s, &p).unwrap()));
            }
        }
    }
    group.finish();
    set_exec(Exec::Parallel);
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(10);
    let s = state(2, 256);
    let p = ModelParams::default();
    let cfg = StepConfig::new(1.0, 1.0);
    for (exec, label) in MODES {
        set_exec(exec);
        group.bench_function(BenchmarkId::new(label, "rk2/d2n256"), |b| {
            b.iter(|| step(&s, 1e-4, &p, &cfg).unwrap())
        });
    }
    group.finish();
    set_exec(Exec::Parallel);
}

fn bench_sweep(c: &mut Criterion) {
    let text = r#"
schema_version = 1
[grid]
dim = 1
n = 64
[step]
dt_max = 0.01
t_end = 0.05
sample_every = 0.01
[initial]
kind = "sine-perturbation"
amplitude = 0.1
[sweep]
axis = "eps"
values = [0.1, 0.05, 0.025, 0.0125]
"#;
    let cfg = parse_config(text, &[], Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (exec, label) in MODES {
        set_exec(exec);
        group.bench_function(BenchmarkId::new(label, "eps x4"), |b| {
            b.iter(|| run_sweep(&cfg, &dir.path().join(label)))
        });
    }
    group.finish();
    set_exec(Exec::Parallel);
}

criterion_group!(benches, bench_rhs, bench_step, bench_sweep);
criterion_main!(benches);
