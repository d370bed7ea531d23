//! Separation metrics: SDR, SI-SDR, SDR improvement and
//! permutation-invariant scoring.
//!
//! SDR here is the plain energy ratio between the clean source and the
//! residual `s - ŝ` (no BSS-eval distortion filter). Results are in dB and
//! may be `+∞` (zero residual) or, for SI-SDR, `-∞` (estimate orthogonal to
//! the reference).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::assignment;

/// Finite stand-in for ±∞ when permutations are compared.
pub const INFINITY_SUBSTITUTE_DB: f64 = 300.0;

/// Largest source count searched exhaustively; above this the Hungarian
/// solver is used.
pub const MAX_EXHAUSTIVE_SOURCES: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum SepError {
    #[error("signal lengths differ: {reference} vs {estimate}")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("empty signal")]
    Empty,
    #[error("reference signal is all zeros")]
    SilentReference,
    #[error("{refs} references but {ests} estimates")]
    CountMismatch { refs: usize, ests: usize },
    #[error("no sources to score")]
    NoSources,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Sdr,
    SiSdr,
}

impl Metric {
    pub fn score<T: Copy + Into<f64>>(self, reference: &[T], estimate: &[T]) -> Result<f64, SepError> {
        match self {
            Metric::Sdr => sdr(reference, estimate),
            Metric::SiSdr => si_sdr(reference, estimate),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sdr => "sdr",
            Metric::SiSdr => "si-sdr",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sdr" => Ok(Metric::Sdr),
            "si-sdr" | "si_sdr" | "sisdr" => Ok(Metric::SiSdr),
            other => Err(format!("unknown metric {other:?} (expected sdr or si-sdr)")),
        }
    }
}

fn check_pair<T: Copy + Into<f64>>(reference: &[T], estimate: &[T]) -> Result<(), SepError> {
    if reference.len() != estimate.len() {
        return Err(SepError::LengthMismatch {
            reference: reference.len(),
            estimate: estimate.len(),
        });
    }
    if reference.is_empty() {
        return Err(SepError::Empty);
    }
    if reference.iter().all(|&s| s.into() == 0.0) {
        return Err(SepError::SilentReference);
    }
    Ok(())
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        if signal == 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        10.0 * (signal / noise).log10()
    }
}

/// `10 log10(Σ s² / Σ (s - ŝ)²)`.
pub fn sdr<T: Copy + Into<f64>>(reference: &[T], estimate: &[T]) -> Result<f64, SepError> {
    check_pair(reference, estimate)?;
    let (mut signal, mut residual) = (0.0f64, 0.0f64);
    for (&s, &e) in reference.iter().zip(estimate) {
        let (s, e) = (s.into(), e.into());
        signal += s * s;
        residual += (s - e) * (s - e);
    }
    Ok(ratio_db(signal, residual))
}

/// Scale-invariant SDR: the reference is rescaled by the least-squares
/// coefficient `⟨ŝ, s⟩ / ‖s‖²` before taking the target/residual ratio.
pub fn si_sdr<T: Copy + Into<f64>>(reference: &[T], estimate: &[T]) -> Result<f64, SepError> {
    check_pair(reference, estimate)?;
    let (mut dot, mut energy) = (0.0f64, 0.0f64);
    for (&s, &e) in reference.iter().zip(estimate) {
        let s: f64 = s.into();
        dot += e.into() * s;
        energy += s * s;
    }
    let alpha = dot / energy;
    let (mut target, mut residual) = (0.0f64, 0.0f64);
    for (&s, &e) in reference.iter().zip(estimate) {
        let t = alpha * s.into();
        let r = e.into() - t;
        target += t * t;
        residual += r * r;
    }
    if target == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ratio_db(target, residual))
}

/// Arithmetic mean in dB; any `+∞` makes the mean `+∞`, otherwise any `-∞`
/// makes it `-∞`.
pub fn mean_db(values: &[f64]) -> f64 {
    if values.contains(&f64::INFINITY) {
        f64::INFINITY
    } else if values.contains(&f64::NEG_INFINITY) {
        f64::NEG_INFINITY
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// `a - b` in dB where equal infinities cancel to 0.
fn difference_db(a: f64, b: f64) -> f64 {
    if a.is_infinite() && a == b {
        0.0
    } else {
        a - b
    }
}

fn substitute(v: f64) -> f64 {
    v.clamp(-INFINITY_SUBSTITUTE_DB, INFINITY_SUBSTITUTE_DB)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PitSearch {
    /// Exhaustive up to [`MAX_EXHAUSTIVE_SOURCES`], Hungarian above.
    #[default]
    Auto,
    Exhaustive,
    Hungarian,
}

/// Outcome of permutation-invariant scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PitResult {
    /// `permutation[i]` is the estimate paired with reference `i`.
    pub permutation: Vec<usize>,
    /// Metric per reference under the permutation.
    pub scores: Vec<f64>,
    pub mean: f64,
}

/// `matrix[i][j] = metric(reference i, estimate j)`.
pub fn pairwise_scores<R: AsRef<[f32]>>(refs: &[R], ests: &[R], metric: Metric) -> Result<Vec<Vec<f64>>, SepError> {
    refs.iter()
        .map(|r| ests.iter().map(|e| metric.score(r.as_ref(), e.as_ref())).collect())
        .collect()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Best permutation over a precomputed score matrix.
///
/// Scores are compared after replacing ±∞ by ±300 dB. The exhaustive search
/// visits permutations in lexicographic order and keeps the first maximum.
pub fn best_permutation(matrix: &[Vec<f64>], search: PitSearch) -> Vec<usize> {
    let n = matrix.len();
    let exhaustive = match search {
        PitSearch::Auto => n <= MAX_EXHAUSTIVE_SOURCES,
        PitSearch::Exhaustive => true,
        PitSearch::Hungarian => false,
    };
    if exhaustive {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_total = f64::NEG_INFINITY;
        loop {
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| substitute(matrix[i][j])).sum();
            if total > best_total {
                best_total = total;
                best.copy_from_slice(&perm);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    } else {
        let key: Vec<Vec<f64>> = matrix
            .iter()
            .map(|row| row.iter().map(|&v| substitute(v)).collect())
            .collect();
        assignment::solve_max(&key)
            .into_iter()
            .map(|c| c.expect("square matrix matches every row"))
            .collect()
    }
}

pub fn pit_with<R: AsRef<[f32]>>(refs: &[R], ests: &[R], metric: Metric, search: PitSearch) -> Result<PitResult, SepError> {
    if refs.len() != ests.len() {
        return Err(SepError::CountMismatch {
            refs: refs.len(),
            ests: ests.len(),
        });
    }
    if refs.is_empty() {
        return Err(SepError::NoSources);
    }
    let matrix = pairwise_scores(refs, ests, metric)?;
    let permutation = best_permutation(&matrix, search);
    let scores: Vec<f64> = permutation.iter().enumerate().map(|(i, &j)| matrix[i][j]).collect();
    let mean = mean_db(&scores);
    Ok(PitResult {
        permutation,
        scores,
        mean,
    })
}

/// Permutation maximizing the mean metric.
pub fn pit<R: AsRef<[f32]>>(refs: &[R], ests: &[R], metric: Metric) -> Result<PitResult, SepError> {
    pit_with(refs, ests, metric, PitSearch::Auto)
}

/// Scored separation of one item.
#[derive(Debug, Clone, PartialEq)]
pub struct SepReport {
    pub metric: Metric,
    /// `permutation[i]` is the estimate paired with reference `i`.
    pub permutation: Vec<usize>,
    pub per_source_sdr: Vec<f64>,
    pub mean_sdr: f64,
    /// Present when a mixture was supplied.
    pub per_source_sdri: Option<Vec<f64>>,
    pub mean_sdri: Option<f64>,
}

/// Scores estimates against references, optionally searching the best
/// permutation, and reports improvement over `mixture` when given.
pub fn score_separation<R: AsRef<[f32]>>(
    refs: &[R],
    ests: &[R],
    mixture: Option<&[f32]>,
    metric: Metric,
    use_pit: bool,
) -> Result<SepReport, SepError> {
    let (permutation, scores) = if use_pit {
        let r = pit(refs, ests, metric)?;
        (r.permutation, r.scores)
    } else {
        if refs.len() != ests.len() {
            return Err(SepError::CountMismatch {
                refs: refs.len(),
                ests: ests.len(),
            });
        }
        if refs.is_empty() {
            return Err(SepError::NoSources);
        }
        let scores = refs
            .iter()
            .zip(ests)
            .map(|(r, e)| metric.score(r.as_ref(), e.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        ((0..refs.len()).collect(), scores)
    };
    let improvements = mixture
        .map(|mix| {
            refs.iter()
                .zip(&scores)
                .map(|(r, &s)| Ok(difference_db(s, metric.score(r.as_ref(), mix)?)))
                .collect::<Result<Vec<f64>, SepError>>()
        })
        .transpose()?;
    Ok(SepReport {
        metric,
        permutation,
        mean_sdr: mean_db(&scores),
        per_source_sdr: scores,
        mean_sdri: improvements.as_deref().map(mean_db),
        per_source_sdri: improvements,
    })
}

/// SDRi per source: `metric(ref_i, est_π(i)) - metric(ref_i, mixture)` with
/// `π` chosen by PIT.
pub fn sdr_improvement<R: AsRef<[f32]>>(refs: &[R], ests: &[R], mixture: &[f32], metric: Metric) -> Result<SepReport, SepError> {
    score_separation(refs, ests, Some(mixture), metric, true)
}
