//! File-level diarization around a local segmenter.
//!
//! The file is cut into overlapping windows ([`slide_chunks`]); each window
//! comes with a frame-level activity matrix over local speaker slots. For
//! every active slot an embedding is taken from its single-speaker frames,
//! the embeddings are grouped by average-linkage AHC on cosine distance, and
//! the per-window activities are stitched onto a global frame grid under the
//! resulting global labels.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fusion::FeatureMatrix;
use crate::media_io::{Annotation, FeatureStack, Segment};
use crate::powerset::{PowersetError, PowersetSpace, MAX_SIMULTANEOUS};

pub const DEFAULT_WINDOW: f64 = 10.0;
pub const DEFAULT_HOP: f64 = 5.0;
pub const DEFAULT_MIN_SEGMENT: f64 = 0.25;
pub const DEFAULT_AHC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum DiarizeError {
    #[error("invalid window/hop: window {window}, hop {hop} (need 0 < hop <= window)")]
    InvalidHop { window: f64, hop: f64 },
    #[error("invalid duration {0}")]
    InvalidDuration(f64),
    #[error("invalid chunk: {0}")]
    InvalidChunk(String),
    #[error("frame rate {found} differs from {expected}")]
    FrameRateMismatch { expected: f64, found: f64 },
    #[error("embedding {0} has zero norm")]
    ZeroNorm(usize),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no global label for active local speaker {speaker} of chunk {chunk}")]
    MissingAssignment { chunk: usize, speaker: usize },
    #[error("threshold must not be NaN")]
    InvalidThreshold,
    #[error(transparent)]
    Powerset(#[from] PowersetError),
}

/// Window onsets `0, hop, 2·hop, …` until a window reaches the end of the
/// file; the last window is shortened to end exactly at `total_duration`.
pub fn slide_chunks(total_duration: f64, window: f64, hop: f64) -> Result<Vec<(f64, f64)>, DiarizeError> {
    if !(hop > 0.0 && window.is_finite() && hop <= window) {
        return Err(DiarizeError::InvalidHop { window, hop });
    }
    if !(total_duration.is_finite() && total_duration >= 0.0) {
        return Err(DiarizeError::InvalidDuration(total_duration));
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let onset = k as f64 * hop;
        if onset >= total_duration {
            break;
        }
        let end = (onset + window).min(total_duration);
        out.push((onset, end - onset));
        if onset + window >= total_duration {
            break;
        }
        k += 1;
    }
    Ok(out)
}

/// Frame-level activity of one window over its local speaker slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSegmentation {
    onset: f64,
    frame_rate: f64,
    n_speakers: usize,
    activity: Vec<Vec<bool>>,
}

impl ChunkSegmentation {
    /// Rows are frames; at most two slots may be active per frame.
    pub fn new(onset: f64, frame_rate: f64, activity: Vec<Vec<bool>>) -> Result<Self, DiarizeError> {
        if !(onset.is_finite() && onset >= 0.0) {
            return Err(DiarizeError::InvalidChunk(format!("onset {onset}")));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(DiarizeError::InvalidChunk(format!("frame rate {frame_rate}")));
        }
        let n_speakers = activity.first().map_or(0, Vec::len);
        for (t, row) in activity.iter().enumerate() {
            if row.len() != n_speakers {
                return Err(DiarizeError::InvalidChunk(format!("ragged activity at frame {t}")));
            }
            if row.iter().filter(|&&a| a).count() > MAX_SIMULTANEOUS {
                return Err(DiarizeError::InvalidChunk(format!(
                    "more than {MAX_SIMULTANEOUS} active speakers at frame {t}"
                )));
            }
        }
        Ok(Self {
            onset,
            frame_rate,
            n_speakers,
            activity,
        })
    }

    /// Decodes powerset scores (one row of class scores per frame).
    pub fn from_powerset_scores<R: AsRef<[f32]>>(space: &PowersetSpace, scores: &[R], onset: f64, frame_rate: f64) -> Result<Self, DiarizeError> {
        let activity = space.decode_frames(scores)?;
        Self::new(onset, frame_rate, activity)
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn n_frames(&self) -> usize {
        self.activity.len()
    }

    pub fn n_speakers(&self) -> usize {
        self.n_speakers
    }

    pub fn activity(&self) -> &[Vec<bool>] {
        &self.activity
    }

    pub fn is_active(&self, speaker: usize) -> bool {
        self.activity.iter().any(|row| row[speaker])
    }
}

/// A run of frames where exactly one local speaker is active.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerTurn {
    pub speaker: usize,
    /// Absolute onset in seconds.
    pub onset: f64,
    pub duration: f64,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Maximal single-speaker runs of at least `min_duration` seconds.
pub fn single_speaker_segments(chunk: &ChunkSegmentation, min_duration: f64) -> Vec<SpeakerTurn> {
    let sole = |row: &Vec<bool>| -> Option<usize> {
        let mut it = row.iter().enumerate().filter(|(_, &a)| a).map(|(s, _)| s);
        match (it.next(), it.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    };
    let mut out = Vec::new();
    let mut t = 0;
    let frames = chunk.activity.len();
    while t < frames {
        let Some(speaker) = sole(&chunk.activity[t]) else {
            t += 1;
            continue;
        };
        let start = t;
        while t < frames && sole(&chunk.activity[t]) == Some(speaker) {
            t += 1;
        }
        let duration = (t - start) as f64 / chunk.frame_rate;
        if duration >= min_duration {
            out.push(SpeakerTurn {
                speaker,
                onset: chunk.onset + start as f64 / chunk.frame_rate,
                duration,
                start_frame: start,
                end_frame: t,
            });
        }
    }
    out
}

/// Speaker embedding and the (chunk, local speaker) slot it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub chunk: usize,
    pub speaker: usize,
}

/// Supplies one embedding per active (chunk, local speaker) slot.
pub trait EmbeddingProvider {
    /// `turns` are the slot's single-speaker turns (possibly empty).
    /// `None` means no embedding could be formed for the slot.
    fn embed(&self, chunk_index: usize, chunk: &ChunkSegmentation, speaker: usize, turns: &[SpeakerTurn]) -> Option<Vec<f32>>;
}

/// Mean of per-chunk feature frames over a slot's single-speaker turns,
/// L2-normalized. Slots without usable turns fall back to every frame where
/// the slot is active.
#[derive(Debug, Clone)]
pub struct MeanPoolEmbeddings {
    features: Vec<FeatureMatrix>,
}

impl MeanPoolEmbeddings {
    pub fn new(features: Vec<FeatureMatrix>) -> Self {
        Self { features }
    }

    /// One stack layer per chunk.
    pub fn from_stack(stack: &FeatureStack) -> Self {
        Self::new((0..stack.n_layers()).map(|l| FeatureMatrix::from_layer(stack, l)).collect())
    }
}

fn l2_normalized(v: Vec<f64>) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.into_iter().map(|x| (x / norm) as f32).collect())
}

impl EmbeddingProvider for MeanPoolEmbeddings {
    fn embed(&self, chunk_index: usize, chunk: &ChunkSegmentation, speaker: usize, turns: &[SpeakerTurn]) -> Option<Vec<f32>> {
        let feats = self.features.get(chunk_index)?;
        let ranges: Vec<(usize, usize)> = if turns.is_empty() {
            chunk
                .activity
                .iter()
                .enumerate()
                .filter(|(_, row)| row[speaker])
                .map(|(t, _)| (t, t + 1))
                .collect()
        } else {
            turns.iter().map(|t| (t.start_frame, t.end_frame)).collect()
        };
        let scale = f64::from(feats.frame_rate()) / chunk.frame_rate;
        let mut sum = vec![0.0f64; feats.dim()];
        let mut count = 0usize;
        let mut used = vec![false; feats.n_frames()];
        for (a, b) in ranges {
            let lo = ((a as f64 * scale).floor() as usize).min(feats.n_frames());
            let hi = ((b as f64 * scale).ceil() as usize).min(feats.n_frames());
            for (f, seen) in used.iter_mut().enumerate().take(hi).skip(lo) {
                if std::mem::replace(seen, true) {
                    continue;
                }
                for (acc, &v) in sum.iter_mut().zip(feats.row(f)) {
                    *acc += f64::from(v);
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        l2_normalized(sum.into_iter().map(|s| s / count as f64).collect())
    }
}

/// Precomputed embeddings keyed by (chunk index, local speaker).
#[derive(Debug, Clone, Default)]
pub struct FileEmbeddings {
    vectors: BTreeMap<(usize, usize), Vec<f32>>,
}

impl FileEmbeddings {
    pub fn new(vectors: BTreeMap<(usize, usize), Vec<f32>>) -> Self {
        Self { vectors }
    }

    /// Layer = chunk, frame = local speaker, dim = embedding size. All-zero
    /// rows mark missing embeddings.
    pub fn from_stack(stack: &FeatureStack) -> Self {
        let mut vectors = BTreeMap::new();
        for c in 0..stack.n_layers() {
            for s in 0..stack.n_frames() {
                let v: Vec<f32> = (0..stack.dim()).map(|d| stack.get(c, s, d)).collect();
                if v.iter().any(|&x| x != 0.0) {
                    vectors.insert((c, s), v);
                }
            }
        }
        Self { vectors }
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn embed(&self, chunk_index: usize, _chunk: &ChunkSegmentation, speaker: usize, _turns: &[SpeakerTurn]) -> Option<Vec<f32>> {
        self.vectors.get(&(chunk_index, speaker)).cloned()
    }
}

/// `1 - ⟨u, v⟩ / (‖u‖ ‖v‖)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    (1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0)
}

/// Average-linkage agglomerative clustering on cosine distance.
///
/// The closest pair of clusters is merged while its linkage is at most
/// `threshold`; equal linkages resolve to the lexicographically smallest
/// pair of cluster ids (a cluster's id is its smallest member index).
/// Labels are numbered from 0 in order of first appearance.
pub fn ahc_cluster<R: AsRef<[f32]>>(embeddings: &[R], threshold: f64) -> Result<Vec<usize>, DiarizeError> {
    if threshold.is_nan() {
        return Err(DiarizeError::InvalidThreshold);
    }
    let n = embeddings.len();
    if let Some(first) = embeddings.first() {
        let dim = first.as_ref().len();
        for (i, e) in embeddings.iter().enumerate() {
            let e = e.as_ref();
            if e.len() != dim {
                return Err(DiarizeError::DimensionMismatch(dim, e.len()));
            }
            if e.iter().all(|&x| x == 0.0) || e.iter().any(|x| !x.is_finite()) {
                return Err(DiarizeError::ZeroNorm(i));
            }
        }
    }
    // pairwise distance sums between live clusters, indexed by cluster id
    let mut sums = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(embeddings[i].as_ref(), embeddings[j].as_ref());
            sums[i][j] = d;
            sums[j][i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            for j in (i + 1..n).filter(|&j| alive[j]) {
                let link = sums[i][j] / (size[i] * size[j]) as f64;
                if best.is_none_or(|(b, ..)| link < b) {
                    best = Some((link, i, j));
                }
            }
        }
        let Some((link, a, b)) = best else { break };
        if link > threshold {
            break;
        }
        // merge b into a (a < b keeps the smallest member as id)
        alive[b] = false;
        size[a] += size[b];
        for c in 0..n {
            if alive[c] && c != a {
                let s = sums[a][c] + sums[b][c];
                sums[a][c] = s;
                sums[c][a] = s;
            }
        }
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
    }
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    Ok(owner
        .iter()
        .map(|o| {
            let next = relabel.len();
            *relabel.entry(*o).or_insert(next)
        })
        .collect())
}

/// Global label name used in output annotations.
pub fn speaker_name(label: usize) -> String {
    format!("SPEAKER_{label:02}")
}

/// Projects chunk activities onto a file-level grid at `frame_rate`.
///
/// For every global speaker, each grid frame averages the activity of all
/// chunks covering it (a chunk counts as active if any of its slots mapped
/// to that speaker is). Frames with a mean of at least 0.5 are active, and
/// maximal active runs become segments.
pub fn stitch(
    chunks: &[ChunkSegmentation],
    assignment: &BTreeMap<(usize, usize), usize>,
    frame_rate: f64,
    total_duration: f64,
    uri: &str,
) -> Result<Annotation, DiarizeError> {
    if !(total_duration.is_finite() && total_duration >= 0.0) {
        return Err(DiarizeError::InvalidDuration(total_duration));
    }
    let grid_len = (total_duration * frame_rate).round() as usize;
    let n_labels = assignment.values().map(|&l| l + 1).max().unwrap_or(0);
    let mut coverage = vec![0u32; grid_len];
    let mut votes = vec![vec![0u32; grid_len]; n_labels];

    for (c, chunk) in chunks.iter().enumerate() {
        if (chunk.frame_rate - frame_rate).abs() > 1e-9 * frame_rate {
            return Err(DiarizeError::FrameRateMismatch {
                expected: frame_rate,
                found: chunk.frame_rate,
            });
        }
        let mut labels = vec![None; chunk.n_speakers];
        for (s, label) in labels.iter_mut().enumerate() {
            *label = assignment.get(&(c, s)).copied();
            if label.is_none() && chunk.is_active(s) {
                return Err(DiarizeError::MissingAssignment { chunk: c, speaker: s });
            }
        }
        let offset = (chunk.onset * frame_rate).round() as usize;
        let mut hit = vec![false; n_labels];
        for (t, row) in chunk.activity.iter().enumerate() {
            let g = offset + t;
            if g >= grid_len {
                break;
            }
            coverage[g] += 1;
            hit.iter_mut().for_each(|h| *h = false);
            for (s, &on) in row.iter().enumerate() {
                if let (true, Some(l)) = (on, labels[s]) {
                    hit[l] = true;
                }
            }
            for (l, &h) in hit.iter().enumerate() {
                votes[l][g] += u32::from(h);
            }
        }
    }

    let mut annotation = Annotation::new(uri);
    for (label, v) in votes.iter().enumerate() {
        let mut g = 0;
        while g < grid_len {
            let active = |g: usize| coverage[g] > 0 && 2 * v[g] >= coverage[g];
            if !active(g) {
                g += 1;
                continue;
            }
            let start = g;
            while g < grid_len && active(g) {
                g += 1;
            }
            annotation.push(Segment::new(
                start as f64 / frame_rate,
                (g - start) as f64 / frame_rate,
                speaker_name(label),
            ));
        }
    }
    Ok(annotation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiarizeConfig {
    pub window: f64,
    pub hop: f64,
    pub min_segment: f64,
    pub ahc_threshold: f64,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            hop: DEFAULT_HOP,
            min_segment: DEFAULT_MIN_SEGMENT,
            ahc_threshold: DEFAULT_AHC_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diarization {
    pub annotation: Annotation,
    pub embeddings: Vec<Embedding>,
    /// Cluster label per embedding.
    pub labels: Vec<usize>,
    /// (chunk index, local speaker) → global label.
    pub assignment: BTreeMap<(usize, usize), usize>,
    pub n_speakers: usize,
}

/// Full pipeline: single-speaker turns → embeddings → AHC → stitching.
///
/// Chunks are visited in onset order regardless of their order in the
/// slice, so permuting the input (with matching provider indices) leaves the
/// result unchanged.
pub fn diarize_file(
    chunks: &[ChunkSegmentation],
    provider: &dyn EmbeddingProvider,
    config: &DiarizeConfig,
    total_duration: f64,
    uri: &str,
) -> Result<Diarization, DiarizeError> {
    let frame_rate = match chunks.first() {
        Some(c) => c.frame_rate,
        None => {
            return Ok(Diarization {
                annotation: Annotation::new(uri),
                embeddings: Vec::new(),
                labels: Vec::new(),
                assignment: BTreeMap::new(),
                n_speakers: 0,
            })
        }
    };
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    order.sort_by(|&a, &b| chunks[a].onset.total_cmp(&chunks[b].onset).then(a.cmp(&b)));

    let mut embeddings = Vec::new();
    for &c in &order {
        let chunk = &chunks[c];
        let turns = single_speaker_segments(chunk, config.min_segment);
        for s in (0..chunk.n_speakers).filter(|&s| chunk.is_active(s)) {
            let own: Vec<SpeakerTurn> = turns.iter().filter(|t| t.speaker == s).cloned().collect();
            if let Some(vector) = provider.embed(c, chunk, s, &own) {
                embeddings.push(Embedding { vector, chunk: c, speaker: s });
            }
        }
    }
    let vectors: Vec<&[f32]> = embeddings.iter().map(|e| e.vector.as_slice()).collect();
    let labels = ahc_cluster(&vectors, config.ahc_threshold)?;
    let assignment: BTreeMap<(usize, usize), usize> = embeddings
        .iter()
        .zip(&labels)
        .map(|(e, &l)| ((e.chunk, e.speaker), l))
        .collect();
    let annotation = stitch(chunks, &assignment, frame_rate, total_duration, uri)?;
    let n_speakers = labels.iter().map(|l| l + 1).max().unwrap_or(0);
    Ok(Diarization {
        annotation,
        embeddings,
        labels,
        assignment,
        n_speakers,
    })
}
