//! Throughput of the sampling, decoding and graph-construction hot paths.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use msinject::decoder::DecoderScratch;
use msinject::protocol::SchemeVariant;
use msinject::sim::{trial_rng, Simulator};
use msinject_bench::{injection, operating_noise, operating_simulator, sample_syndromes};

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_trial");
    for (dx2, dz2) in [(3, 15), (5, 25)] {
        let sim = operating_simulator(dx2, dz2);
        let mut s = sim.scratch();
        let mut trial = 0u64;
        g.bench_function(format!("zz_{dx2}x{dz2}"), |b| {
            b.iter(|| {
                trial += 1;
                sim.run_trial(&mut trial_rng(1, 0, trial), &mut s).expect("trial")
            })
        });
    }
    g.finish();
}

fn decode(c: &mut Criterion) {
    let sim = operating_simulator(3, 15);
    let syns = sample_syndromes(&sim, 256, 7);
    let mut s = DecoderScratch::default();
    let mut i = 0;
    c.bench_function("decode_zz_3x15", |b| {
        b.iter(|| {
            i = (i + 1) % syns.len();
            sim.graph.decode(&syns[i], &mut s).expect("decodable")
        })
    });
}

fn graph_build(c: &mut Criterion) {
    let prog = injection(SchemeVariant::TwoQubitZz, 3, 15);
    let noise = operating_noise();
    let mut g = c.benchmark_group("graph_build");
    g.sample_size(10);
    g.bench_function("zz_3x15", |b| {
        b.iter_batched(|| (prog.clone(), noise), |(p, n)| Simulator::new(p, n).expect("simulator"), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, trials, decode, graph_build);
criterion_main!(benches);
