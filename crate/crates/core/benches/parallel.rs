//! Sequential vs rayon execution of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dnls_core::evolver::EvolveConfig;
use dnls_core::experiment::{run_sweep, InstabilityConfig, Setup};
use dnls_core::linop::{assemble_ltilde, coercivity_probe};
use dnls_core::soliton::{classify_params, find_kappa0, Soliton};
use dnls_core::{Exec, Grid};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_ltilde");
    for n in [256, 512] {
        let grid = Grid::new(n, 20.0).unwrap();
        let sol = Soliton::new(classify_params(1.0, 1.0, 0.5), &grid).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &exec, |b, &e| {
                b.iter(|| black_box(assemble_ltilde(&sol, e)))
            });
        }
    }
    g.finish();
}

fn probes_and_sweeps(c: &mut Criterion) {
    let grid = Grid::new(512, 25.0).unwrap();
    let p = classify_params(1.0, 1.0, 2.0 * find_kappa0(1.0, &grid).unwrap());
    let setup = Setup::new(p, &grid, Exec::Parallel).unwrap();
    let h1 = setup.sol.phi.norm_h1();

    let mut g = c.benchmark_group("coercivity_probe_32");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| black_box(coercivity_probe(&setup.spectral, &setup.sol, 32, 1, exec).unwrap()))
        });
    }
    g.finish();

    let mut ecfg = EvolveConfig::new(4e-3, 1.0);
    ecfg.record_every = 10;
    let cfgs: Vec<InstabilityConfig> = [5e-3, 1e-2, 2e-2, 4e-2]
        .iter()
        .map(|&d| InstabilityConfig {
            delta: d * h1,
            alpha: 0.1 * h1,
            sign: 1.0,
            evolve: ecfg,
            slope_tol: 1e-12,
        })
        .collect();
    let mut g = c.benchmark_group("instability_sweep_4");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(run_sweep(&setup, &cfgs, exec))));
    }
    g.finish();
}

criterion_group!(benches, assembly, probes_and_sweeps);
criterion_main!(benches);
