#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speechprobe_core::media_io::{write_feature_stack, write_wav};
use speechprobe_core::{AudioBuffer, FeatureStack};

pub fn speechprobe<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_speechprobe"))
        .args(args)
        .output()
        .expect("spawn speechprobe")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn put_wav(dir: &Path, name: &str, samples: Vec<f32>, rate: u32) -> PathBuf {
    let p = dir.join(name);
    write_wav(&AudioBuffer::new(samples, rate).unwrap(), &p).unwrap();
    p
}

pub fn put_stack(dir: &Path, name: &str, layers: usize, frames: usize, dim: usize, rate: f32, data: Vec<f32>) -> PathBuf {
    let p = dir.join(name);
    write_feature_stack(&FeatureStack::new(layers, frames, dim, rate, data).unwrap(), &p).unwrap();
    p
}

pub fn put_text(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn noise(seed: u64, len: usize, amp: f32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
}

/// Two time-disjoint sources of `len` samples: noise bursts in alternating
/// halves.
pub fn disjoint_sources(seed: u64, len: usize) -> (Vec<f32>, Vec<f32>) {
    let n = noise(seed, len, 0.4);
    let half = len / 2;
    let a = n.iter().enumerate().map(|(i, &v)| if i < half { v } else { 0.0 }).collect();
    let b = n.iter().enumerate().map(|(i, &v)| if i >= half { v } else { 0.0 }).collect();
    (a, b)
}

/// Two chunks (10 s at 50 Hz, hop 5 s, file 15 s) over two local slots,
/// plus orthogonal per-slot embeddings. Speaker X talks 1–4 s and 11–13 s,
/// speaker Y talks 6–9 s; the second chunk lists Y in slot 0.
pub struct DiarizationFixture {
    pub activity: Vec<f32>,
    pub embeddings: Vec<f32>,
    pub reference_rttm: String,
}

pub fn two_speaker_fixture() -> DiarizationFixture {
    let frames = 500;
    let mut activity = vec![0.0f32; 2 * frames * 2];
    let mut set = |chunk: usize, slot: usize, range: std::ops::Range<usize>| {
        for t in range {
            activity[(chunk * frames + t) * 2 + slot] = 1.0;
        }
    };
    set(0, 0, 50..200);
    set(0, 1, 300..450);
    set(1, 0, 50..200);
    set(1, 1, 300..400);
    // chunk-major, slot rows, 3-dim vectors
    let x = [1.0f32, 0.0, 0.0];
    let y = [0.0f32, 1.0, 0.0];
    let embeddings = [x, y, y, x].concat();
    let reference_rttm = "SPEAKER f 1 1.000 3.000 <NA> <NA> X <NA> <NA>\n\
                          SPEAKER f 1 6.000 3.000 <NA> <NA> Y <NA> <NA>\n\
                          SPEAKER f 1 11.000 2.000 <NA> <NA> X <NA> <NA>\n"
        .to_string();
    DiarizationFixture {
        activity,
        embeddings,
        reference_rttm,
    }
}
