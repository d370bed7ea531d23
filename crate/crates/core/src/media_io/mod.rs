//! Audio, annotation and feature-stack carriers together with their file
//! formats: PCM16 mono WAV, RTTM `SPEAKER` lines and the `SSLF` container.

mod rttm;
mod sslf;
mod wav;

pub use rttm::{emit_rttm, parse_rttm, read_rttm, RttmError};
pub use sslf::{decode_feature_stack, encode_feature_stack, read_feature_stack, write_feature_stack, SslfError, SSLF_HEADER_LEN, SSLF_MAGIC, SSLF_VERSION};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavError};

/// Mono waveform with its sample rate.
///
/// Samples are nominally in `[-1, 1]`; values outside that range are kept
/// as-is and only clipped when written to PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Returns `None` when the rate is zero or any sample is non-finite.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Option<Self> {
        if sample_rate == 0 || samples.iter().any(|s| !s.is_finite()) {
            return None;
        }
        Some(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Option<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// One labeled speech turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub onset: f64,
    pub duration: f64,
    pub speaker: String,
}

impl Segment {
    pub fn new(onset: f64, duration: f64, speaker: impl Into<String>) -> Self {
        Self {
            onset,
            duration,
            speaker: speaker.into(),
        }
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    fn is_valid(&self) -> bool {
        self.onset.is_finite()
            && self.onset >= 0.0
            && self.duration.is_finite()
            && self.duration > 0.0
            && !self.speaker.is_empty()
    }
}

/// Who speaks when in one recording.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Annotation {
    pub uri: String,
    segments: Vec<Segment>,
}

impl Annotation {
    pub fn new(uri: impl Into<String>) -> Self {
        Self {
            uri: uri.into(),
            segments: Vec::new(),
        }
    }

    /// Builds an annotation, rejecting segments with a non-positive duration,
    /// a negative or non-finite onset, or an empty label.
    pub fn with_segments(uri: impl Into<String>, segments: Vec<Segment>) -> Option<Self> {
        if !segments.iter().all(Segment::is_valid) {
            return None;
        }
        Some(Self {
            uri: uri.into(),
            segments,
        })
    }

    /// Adds a segment; returns `false` (and leaves the annotation untouched)
    /// if the segment is invalid.
    pub fn push(&mut self, segment: Segment) -> bool {
        if !segment.is_valid() {
            return false;
        }
        self.segments.push(segment);
        true
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Distinct speaker labels in lexicographic order.
    pub fn speakers(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self.segments.iter().map(|s| s.speaker.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Segments sorted by onset, then by label.
    pub fn sorted_segments(&self) -> Vec<&Segment> {
        let mut segs: Vec<&Segment> = self.segments.iter().collect();
        segs.sort_by(|a, b| {
            a.onset
                .total_cmp(&b.onset)
                .then_with(|| a.speaker.cmp(&b.speaker))
                .then_with(|| a.duration.total_cmp(&b.duration))
        });
        segs
    }

    /// Copy with every speaker label passed through `rename`.
    pub fn relabeled<F: FnMut(&str) -> String>(&self, mut rename: F) -> Self {
        Self {
            uri: self.uri.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(s.onset, s.duration, rename(&s.speaker)))
                .collect(),
        }
    }
}

/// Layer-wise frame features: `n_layers × n_frames × dim`, layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    n_layers: usize,
    n_frames: usize,
    dim: usize,
    frame_rate: f32,
    data: Vec<f32>,
}

impl FeatureStack {
    /// Returns `None` if any size is zero, the data length disagrees with the
    /// declared shape, the frame rate is not positive, or a value is
    /// non-finite.
    pub fn new(n_layers: usize, n_frames: usize, dim: usize, frame_rate: f32, data: Vec<f32>) -> Option<Self> {
        if n_layers == 0 || n_frames == 0 || dim == 0 {
            return None;
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return None;
        }
        let expected = n_layers.checked_mul(n_frames)?.checked_mul(dim)?;
        if data.len() != expected || data.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self {
            n_layers,
            n_frames,
            dim,
            frame_rate,
            data,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f32 {
        self.frame_rate
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Contiguous `n_frames × dim` slab of one layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let size = self.n_frames * self.dim;
        &self.data[layer * size..(layer + 1) * size]
    }

    pub fn get(&self, layer: usize, frame: usize, d: usize) -> f32 {
        self.data[(layer * self.n_frames + frame) * self.dim + d]
    }
}
