use bergman_dpp::coupling::palm_coupling;
use bergman_dpp::dpp::exact_distribution;
use bergman_dpp::{conditional_kernel, Configuration, PalmTuple, RngSeed, Sampler};
use bergman_dpp_bench::{contraction, disk_kernel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sampling(c: &mut Criterion) {
    let (k, _) = disk_kernel(1.0, 16);
    let sampler = Sampler::new(&k).unwrap();
    let mut i = 0u64;
    c.bench_function("sample_disk_256", |b| {
        b.iter(|| {
            i += 1;
            sampler.sample(RngSeed::new(0, i)).unwrap()
        })
    });
}

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_distribution");
    for m in [6, 8, 10] {
        let k = contraction(2, m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &k, |b, k| b.iter(|| exact_distribution(k).unwrap()));
    }
    g.finish();
}

fn conditioning(c: &mut Criterion) {
    let (k, b) = disk_kernel(0.0, 16);
    let exterior = Sampler::new(&k).unwrap().sample(RngSeed::new(3, 0)).unwrap();
    let outside: Vec<usize> = exterior.indices().iter().copied().filter(|s| !b.contains(s)).collect();
    let exterior = Configuration::new(outside, k.size()).unwrap();
    let mut g = c.benchmark_group("conditional_kernel");
    g.sample_size(10);
    g.bench_function("disk_256", |bench| bench.iter(|| conditional_kernel(&k, &b, &exterior).unwrap()));
    g.finish();
}

fn coupling(c: &mut Criterion) {
    let mut g = c.benchmark_group("palm_coupling");
    for m in [5, 8] {
        let k = contraction(4, m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &k, |b, k| {
            b.iter(|| palm_coupling(k, &PalmTuple::single(0)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, enumeration, conditioning, coupling);
criterion_main!(benches);
