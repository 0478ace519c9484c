use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use starlattice::{
    forward_transform, inverse_transform, star_cubic, star_product, step, EquationSpec,
    ThetaTensor, Variant,
};
use starlattice_bench::{dealiased_field, sech_line, square_grid};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft");
    for n in [64, 256] {
        let f = dealiased_field(&square_grid(n), 1);
        group.bench_with_input(BenchmarkId::new("round_trip", n), &f, |b, f| {
            b.iter(|| inverse_transform(&forward_transform(black_box(f)).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn star(c: &mut Criterion) {
    let theta = ThetaTensor::planar(0.5).unwrap();
    let mut group = c.benchmark_group("star");
    group.sample_size(10);
    for n in [16, 32] {
        let grid = square_grid(n);
        let (f, g) = (dealiased_field(&grid, 2), dealiased_field(&grid, 3));
        group.bench_with_input(
            BenchmarkId::new("product", n),
            &(f.clone(), g),
            |b, (f, g)| b.iter(|| star_product(black_box(f), black_box(g), &theta).unwrap()),
        );
        group.bench_with_input(BenchmarkId::new("cubic", n), &f, |b, f| {
            b.iter(|| star_cubic(black_box(f), &theta).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    let psi = sech_line(512);
    let free = EquationSpec::potential_free(psi.grid(), 1.0).unwrap();
    group.bench_function("potential_free_512", |b| {
        b.iter(|| step(black_box(&psi), &free, 1e-3).unwrap())
    });

    group.sample_size(10);
    let grid = square_grid(32);
    let psi = dealiased_field(&grid, 4);
    for (name, variant) in [
        (
            "noncommutative_32x32",
            Variant::Noncommutative(ThetaTensor::planar(0.5).unwrap()),
        ),
        (
            "weak_noncommutative_32x32",
            Variant::WeakNoncommutative(ThetaTensor::planar(0.5).unwrap()),
        ),
    ] {
        let eq = EquationSpec::new(&grid, variant, 1.0).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| step(black_box(&psi), &eq, 1e-3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, transforms, star, steps);
criterion_main!(benches);
