use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;
use toda_tba::determinants::hill_zeros;
use toda_tba::gutzwiller::y_from_determinants_grid;
use toda_tba::model::{HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::nlie::{solve_nlie_with, Grid, NlieOptions};
use toda_tba::par::Exec;

struct Case {
    label: &'static str,
    t: SpectralPolynomial,
    params: ModelParams,
    cfg: TruncationConfig,
    zeros: HillZeros,
    grid: Grid,
}

fn case(label: &'static str, tau: &[f64], g: f64) -> Case {
    let params = ModelParams::new(tau.len(), 1.0, g, 1.0).unwrap();
    let t = SpectralPolynomial::new(tau.iter().map(|&x| Complex64::from(x)).collect(), 1.0).unwrap();
    let cfg = TruncationConfig::default_for(&params);
    let zeros = hill_zeros(&t, &params, &cfg).unwrap();
    let grid = Grid::for_zeros(&zeros, &params);
    Case {
        label,
        t,
        params,
        cfg,
        zeros,
        grid,
    }
}

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn solve(c: &mut Criterion) {
    let cases = [
        case("n2_contracting", &[1.5, -1.5], 1.0),
        case("n2_continuation", &[1.0, -1.0], 0.97),
    ];
    let mut group = c.benchmark_group("solve_nlie");
    group.sample_size(10);
    for cs in &cases {
        for (name, exec) in POLICIES {
            let opts = NlieOptions {
                exec,
                ..NlieOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(name, cs.label), cs, |b, cs| {
                b.iter(|| solve_nlie_with(black_box(&cs.zeros), &cs.params, &cs.grid, &opts, None).unwrap())
            });
        }
    }
    group.finish();
}

fn determinant_profile(c: &mut Criterion) {
    let cs = case("n3", &[-2.1, 0.3, 1.9], 1.0);
    let nodes: Vec<f64> = cs.grid.nodes().iter().copied().step_by(4).collect();
    let mut group = c.benchmark_group("y_from_determinants_grid");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::new(name, cs.label), |b| {
            b.iter(|| y_from_determinants_grid(black_box(&nodes), &cs.t, &cs.zeros, &cs.params, &cs.cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solve, determinant_profile);
criterion_main!(benches);
