use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcde_core::copula::{Copula, CopulaFamily, FamilyKind};
use mcde_core::divergence::{loss, DivergenceSpec};
use mcde_core::empirical::pseudo_observations;
use mcde_core::estimation::{fit_mcde, fit_mle, FitOptions};
use mcde_core::special::bvn_cdf;

fn empirical_copula(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_copula");
    for &(d, n) in &[(2, 2_000), (2, 20_000), (5, 2_000)] {
        let model = Copula::with_theta(FamilyKind::Clayton, d, 1.0).unwrap();
        let data = model.sample(n, 1).unwrap();
        group.bench_with_input(BenchmarkId::new(format!("d{d}"), n), &data, |b, data| {
            b.iter(|| {
                let u = pseudo_observations(black_box(data)).unwrap();
                black_box(u.empirical().eval_at_sample()[0])
            })
        });
    }
    group.finish();
}

fn fits(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    let fam = CopulaFamily::bivariate(FamilyKind::Clayton);
    let spec = DivergenceSpec::beta(0.1).unwrap();
    for &n in &[200, 2_000] {
        let u = pseudo_observations(&Copula::with_theta(FamilyKind::Clayton, 2, 0.5).unwrap().sample(n, 2).unwrap())
            .unwrap();
        u.empirical().eval_at_sample();
        group.bench_with_input(BenchmarkId::new("beta_mcde", n), &u, |b, u| {
            b.iter(|| fit_mcde(black_box(u), &fam, &spec, &FitOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mle", n), &u, |b, u| {
            b.iter(|| fit_mle(black_box(u), &fam, &FitOptions::default()).unwrap())
        });
    }
    let gauss = Copula::with_theta(FamilyKind::Gaussian, 2, 0.4).unwrap();
    let u = pseudo_observations(&gauss.sample(500, 3).unwrap()).unwrap();
    u.empirical().eval_at_sample();
    group.bench_function("gaussian_loss_500", |b| b.iter(|| loss(&spec, black_box(&u), &gauss).unwrap()));
    group.finish();
}

fn bivariate_normal(c: &mut Criterion) {
    c.bench_function("bvn_cdf", |b| {
        b.iter(|| bvn_cdf(black_box(-0.7), black_box(1.2), black_box(0.6)))
    });
}

criterion_group!(benches, empirical_copula, fits, bivariate_normal);
criterion_main!(benches);
