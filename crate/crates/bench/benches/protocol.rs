use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sif_bench::{fixture, rng};
use sif_core::shamir::lagrange_basis_at_zero;
use sif_core::transport::sim::SimNetwork;
use sif_core::{csif, sif, split, FieldParams, GroupParams, QueryOptions, Scheme, SharingPolicy};

fn sharing(c: &mut Criterion) {
    let f = FieldParams::default();
    let mut g = c.benchmark_group("shamir");
    for (n, k) in [(5, 3), (20, 10)] {
        let policy = SharingPolicy::new(n, k, f).unwrap();
        let mut r = rng(1);
        g.bench_with_input(BenchmarkId::new("split", format!("{k}-of-{n}")), &policy, |b, p| {
            b.iter(|| split(f.reduce(854), p, &mut r).unwrap())
        });
        let xs = policy.x_coords()[..k].to_vec();
        g.bench_with_input(BenchmarkId::new("lagrange_at_zero", k), &xs, |b, xs| {
            b.iter(|| lagrange_basis_at_zero(xs).unwrap())
        });
    }
    g.finish();
}

fn sif_query(c: &mut Criterion) {
    let f = FieldParams::default();
    let mut g = c.benchmark_group("sif_query");
    for size in [100, 1_000, 10_000] {
        let (archive, chain, elements) = fixture(f, 5, 3, size, 2);
        let mut r = rng(3);
        g.throughput(Throughput::Elements(size as u64));
        g.bench_with_input(BenchmarkId::new("direct", size), &size, |b, _| {
            b.iter(|| sif::run_query(&archive, elements[size / 2], &chain, QueryOptions::default(), &mut r).unwrap())
        });
        let mut net = SimNetwork::new(archive.clone(), None, 4);
        g.bench_with_input(BenchmarkId::new("simulated_wire", size), &size, |b, _| {
            b.iter(|| net.run_query(elements[size / 2], &chain, Scheme::Sif).unwrap())
        });
    }
    g.finish();
}

fn csif_query(c: &mut Criterion) {
    let group = GroupParams::default_2048();
    let mut g = c.benchmark_group("csif_query");
    g.sample_size(10);
    for size in [10, 100] {
        let (archive, chain, elements) = fixture(group.field(), 5, 3, size, 5);
        let mut r = rng(6);
        g.throughput(Throughput::Elements(size as u64));
        g.bench_with_input(BenchmarkId::new("2048-bit", size), &size, |b, _| {
            b.iter(|| csif::run_query(&archive, &group, elements[0], &chain, QueryOptions::default(), &mut r).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sharing, sif_query, csif_query);
criterion_main!(benches);
