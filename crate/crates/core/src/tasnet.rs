//! Inference-only TasNet skeleton: a strided 1-D convolution encoder on the
//! raw waveform, elementwise masks in the latent space and a transposed
//! convolution (overlap-add) decoder.
//!
//! No masking network is included; masks come from a file or from
//! [`oracle_masks`], which derives them from the clean sources.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fusion::FeatureMatrix;
use crate::media_io::{AudioBuffer, FeatureStack};

pub const DEFAULT_KERNEL: usize = 16;
pub const DEFAULT_STRIDE: usize = 8;
pub const DEFAULT_FILTERS: usize = 128;
pub const DEFAULT_MASK_EPSILON: f32 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum TasnetError {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("audio has {len} samples, shorter than the {kernel}-sample kernel")]
    TooShort { len: usize, kernel: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("no sources given")]
    NoSources,
    #[error("source {index} has {len} samples, expected {expected}")]
    SourceLength { index: usize, len: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    #[default]
    Relu,
    Linear,
}

impl Nonlinearity {
    fn apply(self, v: f32) -> f32 {
        match self {
            Nonlinearity::Relu => v.max(0.0),
            Nonlinearity::Linear => v,
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Self::Relu),
            "linear" => Ok(Self::Linear),
            other => Err(format!("unknown nonlinearity {other:?} (expected relu or linear)")),
        }
    }
}

/// Encoder and decoder filter banks, both `n_filters × kernel` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBasis {
    analysis: Vec<f32>,
    synthesis: Vec<f32>,
    n_filters: usize,
    kernel: usize,
    stride: usize,
    nonlinearity: Nonlinearity,
}

impl EncoderBasis {
    pub fn new(
        analysis: Vec<f32>,
        synthesis: Vec<f32>,
        n_filters: usize,
        kernel: usize,
        stride: usize,
        nonlinearity: Nonlinearity,
    ) -> Result<Self, TasnetError> {
        if n_filters == 0 || kernel == 0 {
            return Err(TasnetError::InvalidBasis("need at least one filter of length >= 1".into()));
        }
        if stride == 0 || stride > kernel {
            return Err(TasnetError::InvalidBasis(format!(
                "stride {stride} must lie in 1..={kernel}"
            )));
        }
        let size = n_filters * kernel;
        if analysis.len() != size || synthesis.len() != size {
            return Err(TasnetError::InvalidBasis(format!(
                "expected {size} weights per bank, got {} and {}",
                analysis.len(),
                synthesis.len()
            )));
        }
        if analysis.iter().chain(&synthesis).any(|v| !v.is_finite()) {
            return Err(TasnetError::NonFinite("basis"));
        }
        Ok(Self {
            analysis,
            synthesis,
            n_filters,
            kernel,
            stride,
            nonlinearity,
        })
    }

    /// Gaussian-ish random banks scaled by `1/sqrt(kernel)`, reproducible
    /// from `seed`.
    pub fn seeded(n_filters: usize, kernel: usize, stride: usize, nonlinearity: Nonlinearity, seed: u64) -> Result<Self, TasnetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (kernel.max(1) as f32).sqrt();
        let mut bank = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect() };
        let analysis = bank(n_filters * kernel);
        let synthesis = bank(n_filters * kernel);
        Self::new(analysis, synthesis, n_filters, kernel, stride, nonlinearity)
    }

    /// Random orthonormal `kernel × kernel` basis `Q` with `stride = kernel`
    /// and identical analysis/synthesis banks. With a linear encoder this is
    /// a perfect-reconstruction transform on frame-aligned input.
    pub fn orthonormal(kernel: usize, seed: u64) -> Result<Self, TasnetError> {
        let q = random_orthonormal(kernel, seed);
        Self::new(q.clone(), q, kernel, kernel, kernel, Nonlinearity::Linear)
    }

    /// `[Q; -Q]` with ReLU: `2·kernel` filters whose rectified responses
    /// still reconstruct exactly, since `relu(x) - relu(-x) = x`.
    pub fn signed_orthonormal(kernel: usize, seed: u64) -> Result<Self, TasnetError> {
        let q = random_orthonormal(kernel, seed);
        let mut bank = q.clone();
        bank.extend(q.iter().map(|v| -v));
        Self::new(bank.clone(), bank, 2 * kernel, kernel, kernel, Nonlinearity::Relu)
    }

    /// Layer 0 of `stack` is the analysis bank, layer 1 the synthesis bank
    /// (`n_frames` = filters, `dim` = kernel). A single-layer stack uses the
    /// same bank for both.
    pub fn from_stack(stack: &FeatureStack, stride: usize, nonlinearity: Nonlinearity) -> Result<Self, TasnetError> {
        if stack.n_layers() > 2 {
            return Err(TasnetError::InvalidBasis(format!(
                "basis stack must have 1 or 2 layers, found {}",
                stack.n_layers()
            )));
        }
        let analysis = stack.layer(0).to_vec();
        let synthesis = stack.layer(stack.n_layers() - 1).to_vec();
        Self::new(analysis, synthesis, stack.n_frames(), stack.dim(), stride, nonlinearity)
    }

    pub fn to_stack(&self) -> FeatureStack {
        let mut data = self.analysis.clone();
        data.extend_from_slice(&self.synthesis);
        FeatureStack::new(2, self.n_filters, self.kernel, 1.0, data).expect("validated basis")
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Self {
        self.nonlinearity = nonlinearity;
        self
    }

    /// Encoder frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.kernel).then(|| (len - self.kernel) / self.stride + 1)
    }

    /// Decoder output length for `frames` latent frames.
    pub fn decoded_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.stride + self.kernel
        }
    }

    fn analysis_row(&self, n: usize) -> &[f32] {
        &self.analysis[n * self.kernel..(n + 1) * self.kernel]
    }

    fn synthesis_row(&self, n: usize) -> &[f32] {
        &self.synthesis[n * self.kernel..(n + 1) * self.kernel]
    }
}

/// Modified Gram-Schmidt on a seeded random square matrix; rows of the
/// result are orthonormal.
fn random_orthonormal(size: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(size);
    while rows.len() < size {
        let mut v: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // degenerate draws are re-sampled
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.into_iter().flatten().map(|x| x as f32).collect()
}

/// `S × T × N` masks, source-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    n_sources: usize,
    n_frames: usize,
    n_filters: usize,
    data: Vec<f32>,
}

impl MaskSet {
    /// Values are clipped to `[0, 1]`.
    pub fn new(n_sources: usize, n_frames: usize, n_filters: usize, mut data: Vec<f32>) -> Result<Self, TasnetError> {
        if data.len() != n_sources * n_frames * n_filters {
            return Err(TasnetError::ShapeMismatch(format!(
                "{} mask values for {n_sources}×{n_frames}×{n_filters}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TasnetError::NonFinite("masks"));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            n_sources,
            n_frames,
            n_filters,
            data,
        })
    }

    /// Layers are sources, frames are encoder frames, dim is filters.
    pub fn from_stack(stack: &FeatureStack) -> Result<Self, TasnetError> {
        Self::new(stack.n_layers(), stack.n_frames(), stack.dim(), stack.data().to_vec())
    }

    pub fn to_stack(&self, frame_rate: f32) -> Option<FeatureStack> {
        FeatureStack::new(self.n_sources, self.n_frames, self.n_filters, frame_rate, self.data.clone())
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn source(&self, s: usize) -> &[f32] {
        let size = self.n_frames * self.n_filters;
        &self.data[s * size..(s + 1) * size]
    }
}

/// Latent frame rate in Hz for a given sample rate and stride.
pub fn latent_frame_rate(sample_rate: u32, stride: usize) -> f32 {
    (f64::from(sample_rate) / stride as f64) as f32
}

/// `out[t, n] = g(Σ_l analysis[n, l] · x[t·stride + l])`.
pub fn encode(audio: &AudioBuffer, basis: &EncoderBasis) -> Result<FeatureMatrix, TasnetError> {
    encode_samples(audio.samples(), audio.sample_rate(), basis)
}

fn encode_samples(x: &[f32], sample_rate: u32, basis: &EncoderBasis) -> Result<FeatureMatrix, TasnetError> {
    let frames = basis.frame_count(x.len()).ok_or(TasnetError::TooShort {
        len: x.len(),
        kernel: basis.kernel,
    })?;
    let mut data = Vec::with_capacity(frames * basis.n_filters);
    for t in 0..frames {
        let window = &x[t * basis.stride..t * basis.stride + basis.kernel];
        for n in 0..basis.n_filters {
            let dot: f32 = basis.analysis_row(n).iter().zip(window).map(|(a, b)| a * b).sum();
            data.push(basis.nonlinearity.apply(dot));
        }
    }
    FeatureMatrix::new(frames, basis.n_filters, latent_frame_rate(sample_rate, basis.stride), data)
        .map_err(|_| TasnetError::NonFinite("latent"))
}

/// Elementwise product of the latent with each source's mask.
pub fn apply_masks(latent: &FeatureMatrix, masks: &MaskSet) -> Result<Vec<FeatureMatrix>, TasnetError> {
    if masks.n_frames != latent.n_frames() || masks.n_filters != latent.dim() {
        return Err(TasnetError::ShapeMismatch(format!(
            "latent {}×{} vs masks {}×{}",
            latent.n_frames(),
            latent.dim(),
            masks.n_frames,
            masks.n_filters
        )));
    }
    (0..masks.n_sources)
        .map(|s| {
            let data = latent.data().iter().zip(masks.source(s)).map(|(x, m)| x * m).collect();
            FeatureMatrix::new(latent.n_frames(), latent.dim(), latent.frame_rate(), data)
                .map_err(|_| TasnetError::NonFinite("masked latent"))
        })
        .collect()
}

/// Transposed convolution: each frame's `synthesisᵀ · latent[t]` is
/// overlap-added at offset `t · stride`.
pub fn decode(latent: &FeatureMatrix, basis: &EncoderBasis, sample_rate: u32) -> Result<AudioBuffer, TasnetError> {
    if latent.dim() != basis.n_filters {
        return Err(TasnetError::ShapeMismatch(format!(
            "latent has {} channels, basis has {} filters",
            latent.dim(),
            basis.n_filters
        )));
    }
    let mut out = vec![0.0f32; basis.decoded_len(latent.n_frames())];
    for (t, row) in latent.rows().enumerate() {
        let dst = &mut out[t * basis.stride..t * basis.stride + basis.kernel];
        for (n, &coef) in row.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            for (o, &w) in dst.iter_mut().zip(basis.synthesis_row(n)) {
                *o += coef * w;
            }
        }
    }
    AudioBuffer::new(out, sample_rate).ok_or(TasnetError::NonFinite("decoded audio"))
}

/// Ratio masks from clean sources:
/// `mask[s, t, n] = e_s[t, n] / (Σ_j e_j[t, n] + ε)` clipped to `[0, 1]`,
/// where `e_s` is the ReLU encoding of source `s`.
pub fn oracle_masks(sources: &[AudioBuffer], basis: &EncoderBasis, epsilon: f32) -> Result<MaskSet, TasnetError> {
    let first = sources.first().ok_or(TasnetError::NoSources)?;
    for (index, s) in sources.iter().enumerate() {
        if s.len() != first.len() {
            return Err(TasnetError::SourceLength {
                index,
                len: s.len(),
                expected: first.len(),
            });
        }
    }
    let relu = basis.clone().with_nonlinearity(Nonlinearity::Relu);
    let encoded = sources
        .iter()
        .map(|s| encode(s, &relu))
        .collect::<Result<Vec<_>, _>>()?;
    let cells = encoded[0].data().len();
    let mut total = vec![0.0f32; cells];
    for e in &encoded {
        for (acc, v) in total.iter_mut().zip(e.data()) {
            *acc += v;
        }
    }
    let mut data = Vec::with_capacity(cells * sources.len());
    for e in &encoded {
        data.extend(e.data().iter().zip(&total).map(|(v, sum)| v / (sum + epsilon)));
    }
    MaskSet::new(sources.len(), encoded[0].n_frames(), basis.n_filters, data)
}

/// Encode the mixture, mask it once per source and decode each estimate.
pub fn separate_with_masks(mixture: &AudioBuffer, basis: &EncoderBasis, masks: &MaskSet) -> Result<Vec<AudioBuffer>, TasnetError> {
    let latent = encode(mixture, basis)?;
    apply_masks(&latent, masks)?
        .iter()
        .map(|m| decode(m, basis, mixture.sample_rate()))
        .collect()
}
