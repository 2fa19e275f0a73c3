use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use prismdg_bench::filled_field;
use prismdg_core::layout::{cell_to_soa, soa_to_cell};
use prismdg_core::CellPartition;

fn transposition(c: &mut Criterion) {
    let f = filled_field(2, 1000, 32);
    let mut g = c.benchmark_group("transpose_1000x32");
    g.throughput(Throughput::Elements(f.data().len() as u64));
    for width in [8usize, 128] {
        let part = CellPartition::all(1000, width);
        let blocks = soa_to_cell(&f, &part).unwrap();
        g.bench_with_input(BenchmarkId::new("soa_to_cell", width), &part, |b, p| b.iter(|| soa_to_cell(black_box(&f), p).unwrap()));
        g.bench_with_input(BenchmarkId::new("cell_to_soa", width), &blocks, |b, bl| b.iter(|| cell_to_soa(black_box(bl)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, transposition);
criterion_main!(benches);
