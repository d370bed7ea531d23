//! Diarization error rate.
//!
//! Scoring sweeps the elementary intervals delimited by every segment
//! boundary. On an interval of length `d` with `n_ref` reference speakers,
//! `n_hyp` hypothesis speakers and `n_correct` co-active mapped pairs:
//!
//! ```text
//! missed      += d · max(0, n_ref - n_hyp)
//! false_alarm += d · max(0, n_hyp - n_ref)
//! confusion   += d · (min(n_ref, n_hyp) - n_correct)
//! ```
//!
//! The reference-to-hypothesis mapping is one-to-one and maximizes total
//! co-active time over the whole scored region (Hungarian assignment).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::assignment;
use crate::media_io::Annotation;

#[derive(Debug, Error, PartialEq)]
pub enum DerError {
    #[error("collar must be finite and non-negative, got {0}")]
    InvalidCollar(f64),
    #[error("no reference speech in the scored region but the hypothesis has {0:.3} s of speech")]
    UndefinedRate(f64),
    #[error("invalid evaluation region [{0}, {1})")]
    InvalidRegion(f64, f64),
    #[error("UEM line {line}: {message}")]
    Uem { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Sorted, disjoint half-open intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timeline(Vec<(f64, f64)>);

impl Timeline {
    /// Union of arbitrary intervals; empty or inverted ones are dropped.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(intervals: I) -> Self {
        let mut v: Vec<(f64, f64)> = intervals.into_iter().filter(|(a, b)| b > a).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self(out)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.0.iter().map(|(a, b)| b - a).sum()
    }

    pub fn extent(&self) -> Option<(f64, f64)> {
        Some((self.0.first()?.0, self.0.last()?.1))
    }

    pub fn intersect(&self, other: &Timeline) -> Timeline {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            let (a0, a1) = self.0[i];
            let (b0, b1) = other.0[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Timeline(out)
    }

    pub fn subtract(&self, other: &Timeline) -> Timeline {
        let mut out = Vec::new();
        let mut j = 0;
        for &(mut a, b) in &self.0 {
            while j < other.0.len() && other.0[j].1 <= a {
                j += 1;
            }
            let mut k = j;
            while k < other.0.len() && other.0[k].0 < b {
                let (c0, c1) = other.0[k];
                if c0 > a {
                    out.push((a, c0));
                }
                a = a.max(c1);
                if a >= b {
                    break;
                }
                k += 1;
            }
            if a < b {
                out.push((a, b));
            }
        }
        Timeline(out)
    }

    /// Total length of the intersection, without materializing it.
    pub fn overlap(&self, other: &Timeline) -> f64 {
        self.intersect(other).duration()
    }
}

/// Per-speaker activity: the union of each label's segments.
pub fn speaker_timelines(annotation: &Annotation) -> BTreeMap<String, Timeline> {
    let mut raw: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in annotation.segments() {
        raw.entry(s.speaker.clone()).or_default().push((s.onset, s.end()));
    }
    raw.into_iter()
        .map(|(k, v)| (k, Timeline::from_intervals(v)))
        .collect()
}

/// One-to-one reference → hypothesis speaker map and its matched time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeakerMapping {
    pub pairs: BTreeMap<String, String>,
    /// Total co-active time of the mapped pairs, in seconds.
    pub matched: f64,
}

/// Co-activity matrix `ref × hyp` in seconds, rows and columns in label
/// order.
pub fn coactivity_matrix(reference: &BTreeMap<String, Timeline>, hypothesis: &BTreeMap<String, Timeline>) -> Vec<Vec<f64>> {
    reference
        .values()
        .map(|r| hypothesis.values().map(|h| r.overlap(h)).collect())
        .collect()
}

fn map_speakers(reference: &BTreeMap<String, Timeline>, hypothesis: &BTreeMap<String, Timeline>) -> SpeakerMapping {
    let matrix = coactivity_matrix(reference, hypothesis);
    let assign = assignment::solve_max(&matrix);
    let matched = assignment::assignment_value(&matrix, &assign);
    let ref_names: Vec<&String> = reference.keys().collect();
    let hyp_names: Vec<&String> = hypothesis.keys().collect();
    let pairs = assign
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.filter(|&c| matrix[r][c] > 0.0).map(|c| (ref_names[r].clone(), hyp_names[c].clone())))
        .collect();
    SpeakerMapping { pairs, matched }
}

fn restrict(timelines: BTreeMap<String, Timeline>, region: Option<&Timeline>) -> BTreeMap<String, Timeline> {
    match region {
        None => timelines,
        Some(r) => timelines.into_iter().map(|(k, t)| (k, t.intersect(r))).collect(),
    }
}

fn eval_timeline(regions: Option<&[(f64, f64)]>) -> Result<Option<Timeline>, DerError> {
    regions
        .map(|rs| {
            for &(a, b) in rs {
                if !(a.is_finite() && b.is_finite() && b >= a) {
                    return Err(DerError::InvalidRegion(a, b));
                }
            }
            Ok(Timeline::from_intervals(rs.iter().copied()))
        })
        .transpose()
}

/// Optimal speaker mapping, optionally restricted to evaluation regions.
pub fn optimal_mapping(reference: &Annotation, hypothesis: &Annotation, eval_regions: Option<&[(f64, f64)]>) -> Result<SpeakerMapping, DerError> {
    let region = eval_timeline(eval_regions)?;
    let r = restrict(speaker_timelines(reference), region.as_ref());
    let h = restrict(speaker_timelines(hypothesis), region.as_ref());
    Ok(map_speakers(&r, &h))
}

/// Scored DER components for one file (or an aggregate of files).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DerReport {
    pub false_alarm: f64,
    pub missed: f64,
    pub confusion: f64,
    pub total_speech: f64,
    pub fa_pct: f64,
    pub md_pct: f64,
    pub sc_pct: f64,
    pub der_pct: f64,
    pub mapping: BTreeMap<String, String>,
}

impl DerReport {
    /// Derives the percentages from the accumulated seconds. `der_pct` is
    /// the sum of the three component percentages.
    pub fn from_seconds(false_alarm: f64, missed: f64, confusion: f64, total_speech: f64) -> Self {
        let pct = |v: f64| if total_speech > 0.0 { 100.0 * v / total_speech } else { 0.0 };
        let (fa_pct, md_pct, sc_pct) = (pct(false_alarm), pct(missed), pct(confusion));
        Self {
            false_alarm,
            missed,
            confusion,
            total_speech,
            fa_pct,
            md_pct,
            sc_pct,
            der_pct: fa_pct + md_pct + sc_pct,
            mapping: BTreeMap::new(),
        }
    }

    /// Time-weighted aggregate: seconds are summed in the given order.
    pub fn aggregate<'a, I: IntoIterator<Item = &'a DerReport>>(reports: I) -> Self {
        let (mut fa, mut md, mut sc, mut total) = (0.0, 0.0, 0.0, 0.0);
        for r in reports {
            fa += r.false_alarm;
            md += r.missed;
            sc += r.confusion;
            total += r.total_speech;
        }
        Self::from_seconds(fa, md, sc, total)
    }
}

impl fmt::Display for DerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "speech {:.3}s FA {:.3}% MD {:.3}% SC {:.3}% DER {:.3}%",
            self.total_speech, self.fa_pct, self.md_pct, self.sc_pct, self.der_pct
        )
    }
}

/// Scores `hypothesis` against `reference`.
///
/// A positive `collar` removes `±collar` seconds around every reference
/// segment boundary from scoring. `eval_regions`, when given, limits scoring
/// to their union.
pub fn compute_der(
    reference: &Annotation,
    hypothesis: &Annotation,
    collar: f64,
    eval_regions: Option<&[(f64, f64)]>,
) -> Result<DerReport, DerError> {
    if !(collar.is_finite() && collar >= 0.0) {
        return Err(DerError::InvalidCollar(collar));
    }
    let mut region = eval_timeline(eval_regions)?;
    if collar > 0.0 {
        let zones = Timeline::from_intervals(
            reference
                .segments()
                .iter()
                .flat_map(|s| [(s.onset - collar, s.onset + collar), (s.end() - collar, s.end() + collar)]),
        );
        let base = region.unwrap_or_else(|| {
            let all = Timeline::from_intervals(
                reference
                    .segments()
                    .iter()
                    .chain(hypothesis.segments())
                    .map(|s| (s.onset, s.end()))
                    .chain(zones.intervals().iter().copied()),
            );
            Timeline::from_intervals(all.extent())
        });
        region = Some(base.subtract(&zones));
    }

    let ref_tl = restrict(speaker_timelines(reference), region.as_ref());
    let hyp_tl = restrict(speaker_timelines(hypothesis), region.as_ref());
    let mapping = map_speakers(&ref_tl, &hyp_tl);

    let ref_names: Vec<&String> = ref_tl.keys().collect();
    let hyp_index: BTreeMap<&String, usize> = hyp_tl.keys().enumerate().map(|(i, k)| (k, i)).collect();
    let mapped: Vec<Option<usize>> = ref_names
        .iter()
        .map(|r| mapping.pairs.get(*r).map(|h| hyp_index[h]))
        .collect();

    // (time, delta, side, speaker index); side 0 = reference, 1 = hypothesis
    let mut events: Vec<(f64, i32, usize, usize)> = Vec::new();
    for (side, tls) in [&ref_tl, &hyp_tl].into_iter().enumerate() {
        for (idx, tl) in tls.values().enumerate() {
            for &(a, b) in tl.intervals() {
                events.push((a, 1, side, idx));
                events.push((b, -1, side, idx));
            }
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut ref_active = vec![false; ref_tl.len()];
    let mut hyp_active = vec![false; hyp_tl.len()];
    let (mut n_ref, mut n_hyp) = (0usize, 0usize);
    let (mut fa, mut md, mut sc, mut total, mut hyp_speech) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            let (_, delta, side, idx) = events[i];
            let on = delta > 0;
            let slot = if side == 0 { &mut ref_active[idx] } else { &mut hyp_active[idx] };
            if *slot != on {
                *slot = on;
                let count = if side == 0 { &mut n_ref } else { &mut n_hyp };
                if on {
                    *count += 1;
                } else {
                    *count -= 1;
                }
            }
            i += 1;
        }
        let Some(&(next, ..)) = events.get(i) else { break };
        let d = next - t;
        if d <= 0.0 || (n_ref == 0 && n_hyp == 0) {
            continue;
        }
        let correct = mapped
            .iter()
            .enumerate()
            .filter(|(r, h)| ref_active[*r] && h.is_some_and(|h| hyp_active[h]))
            .count();
        md += d * n_ref.saturating_sub(n_hyp) as f64;
        fa += d * n_hyp.saturating_sub(n_ref) as f64;
        sc += d * (n_ref.min(n_hyp) - correct) as f64;
        total += d * n_ref as f64;
        hyp_speech += d * n_hyp as f64;
    }

    if total == 0.0 && hyp_speech > 0.0 {
        return Err(DerError::UndefinedRate(hyp_speech));
    }
    let mut report = DerReport::from_seconds(fa, md, sc, total);
    report.mapping = mapping.pairs;
    Ok(report)
}

/// Parses evaluation regions, one `uri channel onset offset` per line.
pub fn parse_uem(text: &str) -> Result<BTreeMap<String, Vec<(f64, f64)>>, DerError> {
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0].starts_with('#') {
            continue;
        }
        let err = |message: String| DerError::Uem { line: idx + 1, message };
        if fields.len() < 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let onset: f64 = fields[2].parse().map_err(|_| err(format!("bad onset {:?}", fields[2])))?;
        let offset: f64 = fields[3].parse().map_err(|_| err(format!("bad offset {:?}", fields[3])))?;
        if !(onset.is_finite() && offset.is_finite() && offset >= onset) {
            return Err(err(format!("invalid region [{onset}, {offset})")));
        }
        out.entry(fields[0].to_string()).or_default().push((onset, offset));
    }
    Ok(out)
}

pub fn read_uem(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<(f64, f64)>>, DerError> {
    parse_uem(&fs::read_to_string(path).map_err(|e| DerError::Io(e.to_string()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::tests::permutations;
    use crate::media_io::Segment;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ann(segs: &[(f64, f64, &str)]) -> Annotation {
        Annotation::with_segments("f", segs.iter().map(|&(a, d, s)| Segment::new(a, d, s)).collect()).unwrap()
    }

    /// 1 ms frame-grid scorer with exhaustive mapping search; returns
    /// (fa, md, sc, total) in seconds.
    fn grid_der(reference: &Annotation, hypothesis: &Annotation) -> (f64, f64, f64, f64) {
        let rs = reference.speakers();
        let hs = hypothesis.speakers();
        let end = reference
            .segments()
            .iter()
            .chain(hypothesis.segments())
            .map(|s| s.end())
            .fold(0.0, f64::max);
        let frames = (end * 1000.0).ceil() as usize;
        let active = |a: &Annotation, spk: &str, c: f64| {
            a.segments().iter().any(|s| s.speaker == spk && s.onset <= c && c < s.end())
        };
        let mut grid: Vec<(Vec<bool>, Vec<bool>)> = Vec::with_capacity(frames);
        for i in 0..frames {
            let c = (i as f64 + 0.5) / 1000.0;
            grid.push((
                rs.iter().map(|s| active(reference, s, c)).collect(),
                hs.iter().map(|s| active(hypothesis, s, c)).collect(),
            ));
        }
        let n = rs.len().max(hs.len());
        let mut best: Option<(usize, Vec<usize>)> = None;
        for p in permutations(n) {
            let matched = grid
                .iter()
                .map(|(r, h)| (0..rs.len()).filter(|&i| p[i] < hs.len() && r[i] && h[p[i]]).count())
                .sum::<usize>();
            if best.as_ref().is_none_or(|b| matched > b.0) {
                best = Some((matched, p));
            }
        }
        let p = best.map(|b| b.1).unwrap_or_default();
        let (mut fa, mut md, mut sc, mut total) = (0usize, 0usize, 0usize, 0usize);
        for (r, h) in &grid {
            let nr = r.iter().filter(|&&x| x).count();
            let nh = h.iter().filter(|&&x| x).count();
            let correct = (0..rs.len()).filter(|&i| p[i] < hs.len() && r[i] && h[p[i]]).count();
            fa += nh.saturating_sub(nr);
            md += nr.saturating_sub(nh);
            sc += nr.min(nh) - correct;
            total += nr;
        }
        let s = |v: usize| v as f64 / 1000.0;
        (s(fa), s(md), s(sc), s(total))
    }

    fn random_annotation(rng: &mut ChaCha8Rng, prefix: &str, max_speakers: usize) -> Annotation {
        let n_spk = rng.gen_range(1..=max_speakers);
        let n_seg = rng.gen_range(1..=20);
        let segs = (0..n_seg)
            .map(|_| {
                // millisecond-aligned so the grid scorer is exact
                let onset = rng.gen_range(0..50_000) as f64 / 1000.0;
                let dur = rng.gen_range(100..10_000) as f64 / 1000.0;
                Segment::new(onset, dur, format!("{prefix}{}", rng.gen_range(0..n_spk)))
            })
            .collect();
        Annotation::with_segments("f", segs).unwrap()
    }

    #[test]
    fn timeline_algebra() {
        let a = Timeline::from_intervals([(0.0, 2.0), (1.0, 3.0), (5.0, 6.0), (4.0, 4.0)]);
        assert_eq!(a.intervals(), &[(0.0, 3.0), (5.0, 6.0)]);
        let b = Timeline::from_intervals([(2.0, 5.5)]);
        assert_eq!(a.intersect(&b).intervals(), &[(2.0, 3.0), (5.0, 5.5)]);
        assert_eq!(a.subtract(&b).intervals(), &[(0.0, 2.0), (5.5, 6.0)]);
        assert_eq!(b.subtract(&a).intervals(), &[(3.0, 5.0)]);
        assert_eq!(a.overlap(&b), 1.5);
    }

    #[test]
    fn table_arithmetic() {
        // wav2vec2.0 diarization row: FA 4.8, MD 7.7, SC 7.9 -> DER 20.4
        let r = DerReport::from_seconds(4.8, 7.7, 7.9, 100.0);
        assert!((r.der_pct - 20.4).abs() < 1e-9);
        assert!((r.fa_pct + r.md_pct + r.sc_pct - r.der_pct).abs() < 1e-9);
    }

    #[test]
    fn perfect_hypothesis() {
        let r = ann(&[(0.0, 3.0, "A"), (2.0, 4.0, "B"), (7.0, 1.0, "A")]);
        let h = r.relabeled(|s| format!("h_{s}"));
        let rep = compute_der(&r, &h, 0.0, None).unwrap();
        assert_eq!((rep.false_alarm, rep.missed, rep.confusion, rep.der_pct), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(rep.total_speech, 8.0);
        let m = optimal_mapping(&r, &h, None).unwrap();
        assert_eq!(m.matched, 8.0);
        assert_eq!(m.pairs["A"], "h_A");
    }

    #[test]
    fn missed_tail() {
        let rep = compute_der(&ann(&[(0.0, 10.0, "A")]), &ann(&[(0.0, 8.0, "1")]), 0.0, None).unwrap();
        assert_eq!((rep.missed, rep.false_alarm, rep.confusion), (2.0, 0.0, 0.0));
        assert!((rep.der_pct - 20.0).abs() < 1e-12);
    }

    #[test]
    fn confusion_when_one_hyp_covers_two_refs() {
        let r = ann(&[(0.0, 5.0, "A"), (5.0, 5.0, "B")]);
        let h = ann(&[(0.0, 10.0, "1")]);
        let m = optimal_mapping(&r, &h, None).unwrap();
        assert_eq!(m.matched, 5.0);
        assert_eq!(m.pairs.len(), 1);
        let rep = compute_der(&r, &h, 0.0, None).unwrap();
        assert_eq!(rep.confusion, 5.0);
        assert!((rep.der_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cases() {
        let empty = Annotation::new("f");
        let rep = compute_der(&empty, &empty, 0.0, None).unwrap();
        assert_eq!(rep.der_pct, 0.0);
        assert!(optimal_mapping(&empty, &empty, None).unwrap().pairs.is_empty());
        assert_eq!(
            compute_der(&empty, &ann(&[(0.0, 1.0, "x")]), 0.0, None),
            Err(DerError::UndefinedRate(1.0))
        );
        assert_eq!(compute_der(&empty, &empty, -1.0, None), Err(DerError::InvalidCollar(-1.0)));
    }

    #[test]
    fn collar_and_regions() {
        let r = ann(&[(0.0, 10.0, "A")]);
        let h = ann(&[(0.5, 9.0, "1")]);
        // without collar: 0.5 s missed at each end
        assert_eq!(compute_der(&r, &h, 0.0, None).unwrap().missed, 1.0);
        // a 0.5 s collar hides both boundary errors
        let rep = compute_der(&r, &h, 0.5, None).unwrap();
        assert_eq!(rep.missed, 0.0);
        assert_eq!(rep.total_speech, 9.0);
        // scoring only [2, 4) leaves 2 s of clean speech
        let rep = compute_der(&r, &h, 0.0, Some(&[(2.0, 4.0)])).unwrap();
        assert_eq!((rep.total_speech, rep.missed), (2.0, 0.0));
        assert!(compute_der(&r, &h, 0.0, Some(&[(3.0, 1.0)])).is_err());
    }

    #[test]
    fn uem_parsing() {
        let u = parse_uem("rec1 1 0.0 10.0\n\nrec1 1 20 30\nrec2 1 1 2\n").unwrap();
        assert_eq!(u["rec1"], vec![(0.0, 10.0), (20.0, 30.0)]);
        assert!(matches!(parse_uem("rec 1 x 2"), Err(DerError::Uem { line: 1, .. })));
    }

    #[test]
    fn aggregate_is_time_weighted() {
        let a = DerReport::from_seconds(1.0, 0.0, 0.0, 10.0);
        let b = DerReport::from_seconds(0.0, 3.0, 0.0, 30.0);
        let agg = DerReport::aggregate([&a, &b]);
        assert!((agg.der_pct - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mapping_matches_exhaustive_on_four_by_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let seg = |rng: &mut ChaCha8Rng, p: &str, k: usize| {
                Segment::new(rng.gen_range(0.0..30.0), rng.gen_range(0.5..8.0), format!("{p}{k}"))
            };
            let r: Vec<Segment> = (0..12).map(|i| seg(&mut rng, "r", i % 4)).collect();
            let h: Vec<Segment> = (0..12).map(|i| seg(&mut rng, "h", i % 4)).collect();
            let (r, h) = (Annotation::with_segments("f", r).unwrap(), Annotation::with_segments("f", h).unwrap());
            let m = coactivity_matrix(&speaker_timelines(&r), &speaker_timelines(&h));
            let best = permutations(4)
                .iter()
                .map(|p| (0..4).map(|i| m[i][p[i]]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(optimal_mapping(&r, &h, None).unwrap().matched, best);
        }
    }

    #[test]
    fn sweep_matches_frame_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..40 {
            let r = random_annotation(&mut rng, "ref", 4);
            let h = random_annotation(&mut rng, "hyp", 4);
            let rep = compute_der(&r, &h, 0.0, None).unwrap();
            let (fa, md, sc, total) = grid_der(&r, &h);
            assert!((rep.total_speech - total).abs() < 1e-6);
            assert!((rep.false_alarm - fa).abs() < 1e-6, "{} vs {fa}", rep.false_alarm);
            assert!((rep.missed - md).abs() < 1e-6);
            assert!((rep.confusion - sc).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn self_score_is_zero(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_annotation(&mut rng, "s", 5);
            let rep = compute_der(&r, &r, 0.0, None).unwrap();
            prop_assert_eq!(rep.der_pct, 0.0);
        }

        #[test]
        fn renaming_hypothesis_changes_nothing(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_annotation(&mut rng, "r", 4);
            let h = random_annotation(&mut rng, "h", 4);
            let renamed = h.relabeled(|s| format!("z{}", s.chars().rev().collect::<String>()));
            let a = compute_der(&r, &h, 0.0, None).unwrap();
            let b = compute_der(&r, &renamed, 0.0, None).unwrap();
            prop_assert!((a.false_alarm - b.false_alarm).abs() < 1e-9);
            prop_assert!((a.missed - b.missed).abs() < 1e-9);
            prop_assert!((a.confusion - b.confusion).abs() < 1e-9);
        }

        #[test]
        fn removing_a_hypothesis_segment_never_reduces_misses(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_annotation(&mut rng, "r", 3);
            let h = random_annotation(&mut rng, "h", 3);
            let drop = rng.gen_range(0..h.segments().len());
            let fewer: Vec<Segment> = h.segments().iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, s)| s.clone()).collect();
            let fewer = Annotation::with_segments("f", fewer).unwrap();
            let a = compute_der(&r, &h, 0.0, None).unwrap();
            let b = compute_der(&r, &fewer, 0.0, None).unwrap();
            prop_assert!(b.missed >= a.missed - 1e-9);
        }

        #[test]
        fn decomposition_identity(seed in any::<u64>(), collar in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_annotation(&mut rng, "r", 5);
            let h = random_annotation(&mut rng, "h", 5);
            if let Ok(rep) = compute_der(&r, &h, collar, None) {
                prop_assert!((rep.fa_pct + rep.md_pct + rep.sc_pct - rep.der_pct).abs() < 1e-9);
            }
        }
    }
}
