//! Pointwise Wolff potentials over a batch of evaluation points, once on the
//! rayon pool and once on a plain iterator.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wolff_core::parallel;
use wolff_core::potentials::{wolff_p, Quadrature};
use wolff_core::Measure;

fn points(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let t = i as f64 / count as f64;
            vec![0.1 + 2.0 * t, 0.3 * (7.0 * t).sin(), 0.2 * (3.0 * t).cos()]
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let mu = Measure::uniform_ball(&[0.0, 0.0, 0.0], 1.0, 1.0).unwrap();
    let quad = Quadrature::default();
    let eval = |x: &Vec<f64>| wolff_p(&mu, x, 2.0, f64::INFINITY, &quad).unwrap().value;
    let mut g = c.benchmark_group("wolff_p_batch");
    g.sample_size(10);
    for count in [16usize, 64] {
        let xs = points(count);
        g.bench_with_input(BenchmarkId::new("seq", count), &xs, |b, xs| {
            b.iter(|| parallel::map_seq(black_box(xs), eval))
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("par", count), &xs, |b, xs| {
            b.iter(|| parallel::map_par(black_box(xs), eval))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
