use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use porous_opt::assembly::{assemble_darcy, assemble_darcy_state_rhs};
use porous_opt::solver::DarcySolver;
use porous_opt_bench::problem;

fn darcy(c: &mut Criterion) {
    let mut group = c.benchmark_group("darcy");
    group.sample_size(20);
    for n in [16, 32] {
        let p = problem(n, 8);
        group.bench_with_input(BenchmarkId::new("assemble", n), &p, |b, p| {
            b.iter(|| assemble_darcy(&p.disc, p.model.as_ref(), &p.initial).unwrap())
        });
        let matrices = assemble_darcy(&p.disc, p.model.as_ref(), &p.initial).unwrap();
        group.bench_with_input(BenchmarkId::new("factor", n), &p, |b, p| {
            b.iter(|| DarcySolver::new(&p.disc, matrices.clone()).unwrap())
        });
        let solver = DarcySolver::new(&p.disc, matrices).unwrap();
        let f = assemble_darcy_state_rhs(&p.disc, &p.wells, 0.5 * p.wells.q_hat);
        group.bench_with_input(BenchmarkId::new("solve", n), &p, |b, p| {
            b.iter(|| solver.solve_state(&p.disc, &f, p.config.solver_tolerance).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, darcy);
criterion_main!(benches);
