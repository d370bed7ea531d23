//! Layer fusion for frozen self-supervised features.
//!
//! Per-layer representations are collapsed with a weighted average whose
//! weights sum to one (softmax of learnable logits). For separation, the
//! fused features are then replicated along time to the encoder frame count
//! and concatenated onto the encoder latent.

use thiserror::Error;

use crate::media_io::FeatureStack;

/// Allowed deviation of `Σα` from 1 when weights come from outside.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no layer weights given")]
    EmptyWeights,
    #[error("non-finite layer logit at index {0}")]
    NonFiniteLogit(usize),
    #[error("{weights} weights for a stack of {layers} layers")]
    LayerMismatch { weights: usize, layers: usize },
    #[error("layer weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("feature matrix has no frames")]
    EmptyFeatures,
    #[error("target frame count must be at least 1")]
    EmptyTarget,
    #[error("frame counts differ: {left} vs {right}")]
    FrameMismatch { left: usize, right: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
    #[error("cannot parse weight on line {line}: {text:?}")]
    ParseWeight { line: usize, text: String },
}

/// Unnormalized per-layer logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights(pub Vec<f32>);

impl LayerWeights {
    /// Reads one logit per non-empty line.
    pub fn parse(text: &str) -> Result<Self, FusionError> {
        let mut logits = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let v: f32 = t.parse().map_err(|_| FusionError::ParseWeight {
                line: i + 1,
                text: t.to_string(),
            })?;
            logits.push(v);
        }
        Ok(Self(logits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row-major `n_frames × dim` feature matrix at a given frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    dim: usize,
    frame_rate: f32,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n_frames: usize, dim: usize, frame_rate: f32, data: Vec<f32>) -> Result<Self, FusionError> {
        if data.len() != n_frames * dim {
            return Err(FusionError::InvalidMatrix(format!(
                "{} values for a {n_frames}×{dim} matrix",
                data.len()
            )));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(FusionError::InvalidMatrix(format!("frame rate {frame_rate}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::InvalidMatrix("non-finite value".into()));
        }
        Ok(Self {
            n_frames,
            dim,
            frame_rate,
            data,
        })
    }

    pub fn zeros(n_frames: usize, dim: usize, frame_rate: f32) -> Self {
        Self::new(n_frames, dim, frame_rate, vec![0.0; n_frames * dim]).expect("valid zero matrix")
    }

    pub fn from_rows(rows: &[Vec<f32>], frame_rate: f32) -> Result<Self, FusionError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(FusionError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), dim, frame_rate, rows.concat())
    }

    /// One layer of a stack as a matrix.
    pub fn from_layer(stack: &FeatureStack, layer: usize) -> Self {
        Self::new(stack.n_frames(), stack.dim(), stack.frame_rate(), stack.layer(layer).to_vec())
            .expect("stack layers are valid matrices")
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

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.data[frame * self.dim..(frame + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        (0..self.n_frames).map(move |t| self.row(t))
    }

    pub fn get(&self, frame: usize, d: usize) -> f32 {
        self.data[frame * self.dim + d]
    }

    /// Wraps the matrix as a single-layer stack. Fails for empty matrices,
    /// which the container cannot represent.
    pub fn to_stack(&self) -> Option<FeatureStack> {
        FeatureStack::new(1, self.n_frames, self.dim, self.frame_rate, self.data.clone())
    }
}

/// Softmax of the logits, with max subtraction.
pub fn normalize_weights(weights: &LayerWeights) -> Result<Vec<f64>, FusionError> {
    if weights.is_empty() {
        return Err(FusionError::EmptyWeights);
    }
    if let Some(i) = weights.0.iter().position(|w| !w.is_finite()) {
        return Err(FusionError::NonFiniteLogit(i));
    }
    let max = weights.0.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = weights.0.iter().map(|&w| (f64::from(w) - f64::from(max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `out[t, d] = Σ_i α_i · stack[i, t, d]`.
pub fn weighted_sum(stack: &FeatureStack, alpha: &[f64]) -> Result<FeatureMatrix, FusionError> {
    if alpha.len() != stack.n_layers() {
        return Err(FusionError::LayerMismatch {
            weights: alpha.len(),
            layers: stack.n_layers(),
        });
    }
    let sum: f64 = alpha.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(FusionError::NotNormalized(sum));
    }
    let size = stack.n_frames() * stack.dim();
    let mut acc = vec![0.0f64; size];
    for (layer, &a) in alpha.iter().enumerate() {
        for (dst, &v) in acc.iter_mut().zip(stack.layer(layer)) {
            *dst += a * f64::from(v);
        }
    }
    FeatureMatrix::new(
        stack.n_frames(),
        stack.dim(),
        stack.frame_rate(),
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

/// Source frame for each of `target_frames` output frames:
/// `floor(j · n_source / target_frames)`.
pub fn replication_indices(n_source: usize, target_frames: usize) -> Vec<usize> {
    (0..target_frames)
        .map(|j| (j as u128 * n_source as u128 / target_frames as u128) as usize)
        .collect()
}

/// Replicates (or drops) frames so the matrix has `target_frames` rows.
/// No interpolation takes place.
pub fn align_frames(features: &FeatureMatrix, target_frames: usize) -> Result<FeatureMatrix, FusionError> {
    if features.n_frames == 0 {
        return Err(FusionError::EmptyFeatures);
    }
    if target_frames == 0 {
        return Err(FusionError::EmptyTarget);
    }
    let mut data = Vec::with_capacity(target_frames * features.dim);
    for src in replication_indices(features.n_frames, target_frames) {
        data.extend_from_slice(features.row(src));
    }
    let rate = features.frame_rate as f64 * target_frames as f64 / features.n_frames as f64;
    FeatureMatrix::new(target_frames, features.dim, rate as f32, data)
}

/// Row-wise concatenation, latent columns first.
pub fn concat_features(latent: &FeatureMatrix, ssl: &FeatureMatrix) -> Result<FeatureMatrix, FusionError> {
    if latent.n_frames != ssl.n_frames {
        return Err(FusionError::FrameMismatch {
            left: latent.n_frames,
            right: ssl.n_frames,
        });
    }
    let dim = latent.dim + ssl.dim;
    let mut data = Vec::with_capacity(latent.n_frames * dim);
    for t in 0..latent.n_frames {
        data.extend_from_slice(latent.row(t));
        data.extend_from_slice(ssl.row(t));
    }
    FeatureMatrix::new(latent.n_frames, dim, latent.frame_rate, data)
}

/// Splits columns at `at`: the inverse of [`concat_features`].
pub fn split_features(features: &FeatureMatrix, at: usize) -> Result<(FeatureMatrix, FeatureMatrix), FusionError> {
    if at > features.dim {
        return Err(FusionError::InvalidMatrix(format!(
            "split column {at} beyond dim {}",
            features.dim
        )));
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for row in features.rows() {
        left.extend_from_slice(&row[..at]);
        right.extend_from_slice(&row[at..]);
    }
    Ok((
        FeatureMatrix::new(features.n_frames, at, features.frame_rate, left)?,
        FeatureMatrix::new(features.n_frames, features.dim - at, features.frame_rate, right)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stack(rng: &mut ChaCha8Rng, l: usize, t: usize, d: usize) -> FeatureStack {
        let data = (0..l * t * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        FeatureStack::new(l, t, d, 50.0, data).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let a = normalize_weights(&LayerWeights(vec![0.0; 12])).unwrap();
        assert!(a.iter().all(|&x| (x - 1.0 / 12.0).abs() < 1e-15));

        let mut w = vec![0.0; 12];
        w[0] = 40.0;
        let a = normalize_weights(&LayerWeights(w)).unwrap();
        assert!(a[0] >= 1.0 - 1e-12);

        // e^k / (e + e² + e³) for k = 1, 2, 3
        let a = normalize_weights(&LayerWeights(vec![1.0, 2.0, 3.0])).unwrap();
        for (got, want) in a.iter().zip([0.09003, 0.24473, 0.66524]) {
            assert!((got - want).abs() < 1e-5);
        }
        assert_eq!(normalize_weights(&LayerWeights(vec![])), Err(FusionError::EmptyWeights));
        assert_eq!(
            normalize_weights(&LayerWeights(vec![0.0, f32::INFINITY])),
            Err(FusionError::NonFiniteLogit(1))
        );
    }

    #[test]
    fn parse_weight_file() {
        let w = LayerWeights::parse("0.5\n\n-1\n# skip\n2e-1\n").unwrap();
        assert_eq!(w.0, vec![0.5, -1.0, 0.2]);
        assert!(matches!(LayerWeights::parse("x"), Err(FusionError::ParseWeight { line: 1, .. })));
    }

    #[test]
    fn one_hot_selects_a_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stack = random_stack(&mut rng, 4, 10, 3);
        for j in 0..4 {
            let mut alpha = vec![0.0; 4];
            alpha[j] = 1.0;
            let out = weighted_sum(&stack, &alpha).unwrap();
            assert_eq!(out.data(), stack.layer(j));
        }
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stack = random_stack(&mut rng, 4, 10, 3);
        let alpha = normalize_weights(&LayerWeights((0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())).unwrap();
        let out = weighted_sum(&stack, &alpha).unwrap();
        for t in 0..10 {
            for d in 0..3 {
                let mut s = 0.0f64;
                for i in 0..4 {
                    s += alpha[i] * stack.get(i, t, d) as f64;
                }
                assert!((out.get(t, d) as f64 - s).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn weighted_sum_validation() {
        let stack = FeatureStack::new(2, 1, 1, 50.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(
            weighted_sum(&stack, &[1.0]),
            Err(FusionError::LayerMismatch { weights: 1, layers: 2 })
        );
        assert!(matches!(weighted_sum(&stack, &[0.6, 0.6]), Err(FusionError::NotNormalized(_))));
        let out = weighted_sum(&stack, &[0.5, 0.5 + 5e-5]).unwrap();
        assert!((out.get(0, 0) - 1.5).abs() < 1e-3);
    }

    #[test]
    fn align_examples() {
        assert_eq!(replication_indices(3, 7), vec![0, 0, 0, 1, 1, 2, 2]);
        let src = FeatureMatrix::new(500, 1, 50.0, (0..500).map(|v| v as f32).collect()).unwrap();
        let out = align_frames(&src, 1000).unwrap();
        for t in 0..1000 {
            assert_eq!(out.get(t, 0), (t / 2) as f32);
        }
        assert_eq!(out.frame_rate(), 100.0);
        assert_eq!(align_frames(&src, 500).unwrap(), src);
        assert_eq!(align_frames(&src, 0), Err(FusionError::EmptyTarget));
        assert_eq!(
            align_frames(&FeatureMatrix::zeros(0, 2, 50.0), 4),
            Err(FusionError::EmptyFeatures)
        );
    }

    #[test]
    fn concat_examples() {
        let latent = FeatureMatrix::new(3, 1, 100.0, vec![1.0, 2.0, 3.0]).unwrap();
        let ssl = FeatureMatrix::new(3, 1, 100.0, vec![-1.0, -2.0, -3.0]).unwrap();
        let cat = concat_features(&latent, &ssl).unwrap();
        assert_eq!(cat.data(), &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
        let none = FeatureMatrix::zeros(3, 0, 100.0);
        assert_eq!(concat_features(&latent, &none).unwrap(), latent);
        let short = FeatureMatrix::zeros(2, 1, 100.0);
        assert_eq!(
            concat_features(&latent, &short),
            Err(FusionError::FrameMismatch { left: 3, right: 2 })
        );
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(w in prop::collection::vec(-50.0f32..50.0, 1..32)) {
            let a = normalize_weights(&LayerWeights(w)).unwrap();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(a.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn layer_permutation_equivariance(seed in any::<u64>(), shift in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stack = random_stack(&mut rng, 4, 6, 2);
            let alpha = normalize_weights(&LayerWeights((0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())).unwrap();
            let perm: Vec<usize> = (0..4).map(|i| (i + shift) % 4).collect();
            let data: Vec<f32> = perm.iter().flat_map(|&p| stack.layer(p).to_vec()).collect();
            let permuted = FeatureStack::new(4, 6, 2, 50.0, data).unwrap();
            let alpha_p: Vec<f64> = perm.iter().map(|&p| alpha[p]).collect();
            let a = weighted_sum(&stack, &alpha).unwrap();
            let b = weighted_sum(&permuted, &alpha_p).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn align_only_replicates(n in 1usize..40, target in 1usize..120) {
            let src = FeatureMatrix::new(n, 1, 50.0, (0..n).map(|v| v as f32).collect()).unwrap();
            let out = align_frames(&src, target).unwrap();
            let mut prev = 0.0;
            for t in 0..target {
                let v = out.get(t, 0);
                prop_assert!(v.fract() == 0.0 && (v as usize) < n);
                prop_assert!(v >= prev);
                prev = v;
            }
            if target % n == 0 {
                let r = target / n;
                for t in 0..target {
                    prop_assert_eq!(out.get(t, 0) as usize, t / r);
                }
            }
        }

        #[test]
        fn concat_then_split_is_lossless(t in 0usize..10, n in 0usize..5, d in 0usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = |dim: usize| FeatureMatrix::new(t, dim, 50.0, (0..t * dim).map(|_| rng.gen::<f32>()).collect()).unwrap();
            let (a, b) = (m(n), m(d));
            let (x, y) = split_features(&concat_features(&a, &b).unwrap(), n).unwrap();
            prop_assert_eq!(x, a);
            prop_assert_eq!(y, b);
        }
    }
}
