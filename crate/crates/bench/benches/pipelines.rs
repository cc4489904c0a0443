use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lame_bench::{legendre, rectangle, stieltjes};
use lame_core::hs::{pencil_eigenvalues, solve_all, solve_all_p2, solve_p1, MultiStartOptions};
use lame_core::periods::chebotarev_center;
use lame_core::poly::Poly;
use lame_core::quad_diff::{critical_graph, QuadDiffChart};
use lame_core::wkb::{measure_of_chart, predict_lattice_p2, strong_error, support_controls, WkbEvaluator};
use num_complex::Complex64 as C64;

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for n in [10usize, 20, 40] {
        let op = stieltjes(n);
        g.bench_with_input(BenchmarkId::new("pencil_eigenvalues", n), &op, |b, op| b.iter(|| pencil_eigenvalues(black_box(op)).unwrap()));
        g.bench_with_input(BenchmarkId::new("solve_all_p2", n), &op, |b, op| b.iter(|| solve_all_p2(black_box(op), 1e-9).unwrap()));
    }
    let op = legendre(40);
    g.bench_function("solve_p1/40", |b| b.iter(|| solve_p1(black_box(&op)).unwrap()));
    let op = rectangle(4);
    g.bench_function("rectangle_solve_all/4", |b| b.iter(|| solve_all(black_box(&op), 1e-9, &MultiStartOptions::default()).unwrap()));
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    g.sample_size(20);
    let tri = [C64::new(0.3, 1.0), C64::new(-1.2, 0.1), C64::new(0.9, -0.7)];
    g.bench_function("chebotarev_center", |b| b.iter(|| chebotarev_center(black_box(&tri), 1e-13).unwrap()));
    let cheb = chebotarev_center(&tri, 1e-13).unwrap();
    let chart = QuadDiffChart::from_zeros(&[cheb.v_star], &tri).unwrap();
    g.bench_function("critical_graph", |b| b.iter(|| critical_graph(black_box(&chart), &support_controls()).unwrap()));
    g.bench_function("measure_of_chart", |b| b.iter(|| measure_of_chart(black_box(&chart), None).unwrap()));
    g.finish();
}

fn asymptotics(c: &mut Criterion) {
    let mut g = c.benchmark_group("asymptotics");
    g.sample_size(10);
    let op = stieltjes(30);
    let cheb = chebotarev_center(&op.poles, 1e-13).unwrap();
    g.bench_function("predict_lattice/30", |b| b.iter(|| predict_lattice_p2(black_box(&op), &cheb, 0.1, Some(0.2)).unwrap()));
    let op = legendre(40);
    let zeros = solve_p1(&op).unwrap().q_zeros;
    let ev = WkbEvaluator::new(&op, &Poly::one()).unwrap();
    let pts = [C64::new(2.0, 0.0), C64::new(1.0, 1.0), C64::new(0.0, -3.0)];
    g.bench_function("strong_error/40", |b| b.iter(|| strong_error(black_box(&ev), &zeros, &pts, 0.5).unwrap()));
    g.finish();
}

criterion_group!(benches, solvers, geometry, asymptotics);
criterion_main!(benches);
