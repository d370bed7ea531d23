use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speechprobe_core::diarize::ahc_cluster;
use speechprobe_core::resampler::resample;
use speechprobe_core::sep::{pit_with, PitSearch};
use speechprobe_core::{compute_der, Annotation, AudioBuffer, Metric, Segment};

fn annotation(rng: &mut ChaCha8Rng, speakers: usize, segments: usize, prefix: &str) -> Annotation {
    let mut a = Annotation::new("bench");
    for _ in 0..segments {
        let onset = rng.gen_range(0.0..3500.0);
        let duration = rng.gen_range(0.2..10.0);
        a.push(Segment::new(onset, duration, format!("{prefix}{}", rng.gen_range(0..speakers))));
    }
    a
}

fn der(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let reference = annotation(&mut rng, 6, 2000, "r");
    let hypothesis = annotation(&mut rng, 8, 2000, "h");
    c.bench_function("der_2000_segments", |b| {
        b.iter(|| compute_der(black_box(&reference), black_box(&hypothesis), 0.25, None).unwrap())
    });
}

fn resampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let audio = AudioBuffer::new((0..80_000).map(|_| rng.gen_range(-0.5f32..0.5)).collect(), 8000).unwrap();
    c.bench_function("upsample_10s_8k_to_16k", |b| b.iter(|| resample(black_box(&audio), 16000, None).unwrap()));
    let up = resample(&audio, 16000, None).unwrap();
    c.bench_function("downsample_10s_16k_to_8k", |b| b.iter(|| resample(black_box(&up), 8000, None).unwrap()));
}

fn clustering(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let embeddings: Vec<Vec<f32>> = (0..300).map(|_| (0..256).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
    c.bench_function("ahc_300x256", |b| b.iter(|| ahc_cluster(black_box(&embeddings), 0.9).unwrap()));
}

fn pit(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut group = c.benchmark_group("pit_si_sdr_32000");
    for s in [2usize, 4, 6] {
        let refs: Vec<Vec<f32>> = (0..s).map(|_| (0..32_000).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).collect();
        let ests: Vec<Vec<f32>> = refs.iter().rev().map(|r| r.iter().map(|v| v * 0.9).collect()).collect();
        for (label, search) in [("exhaustive", PitSearch::Exhaustive), ("hungarian", PitSearch::Hungarian)] {
            group.bench_function(format!("{label}_{s}"), |b| {
                b.iter(|| pit_with(black_box(&refs), black_box(&ests), Metric::SiSdr, search).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, der, resampling, clustering, pit);
criterion_main!(benches);
