//! Powerset multi-class label space.
//!
//! With `K` speakers the classes are, in this fixed order: non-speech, every
//! single speaker in ascending order, then every unordered pair in
//! lexicographic order. For `K = 3` that is
//! `∅, {1}, {2}, {3}, {1,2}, {1,3}, {2,3}`.

use std::fmt;

use thiserror::Error;

/// Largest number of simultaneously active speakers a class can hold.
pub const MAX_SIMULTANEOUS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum PowersetError {
    #[error("powerset space needs at least one speaker")]
    NoSpeakers,
    #[error("activity vector has {found} entries, expected {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("class index {index} out of range (space has {size} classes)")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("score matrix has {found} columns, expected {expected}")]
    WrongWidth { expected: usize, found: usize },
    #[error("non-finite score at frame {frame}, class {class}")]
    NonFinite { frame: usize, class: usize },
}

/// Ordered catalogue of speaker subsets; each subset holds 0-based speaker
/// indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowersetSpace {
    max_speakers: usize,
    classes: Vec<Vec<usize>>,
}

impl PowersetSpace {
    pub fn new(max_speakers: usize) -> Result<Self, PowersetError> {
        if max_speakers == 0 {
            return Err(PowersetError::NoSpeakers);
        }
        let mut classes = Vec::with_capacity(Self::class_count(max_speakers));
        classes.push(Vec::new());
        classes.extend((0..max_speakers).map(|s| vec![s]));
        for a in 0..max_speakers {
            for b in a + 1..max_speakers {
                classes.push(vec![a, b]);
            }
        }
        Ok(Self {
            max_speakers,
            classes,
        })
    }

    /// `1 + K + K(K-1)/2`.
    pub fn class_count(max_speakers: usize) -> usize {
        1 + max_speakers + max_speakers * max_speakers.saturating_sub(1) / 2
    }

    pub fn max_speakers(&self) -> usize {
        self.max_speakers
    }

    pub fn max_simultaneous(&self) -> usize {
        MAX_SIMULTANEOUS
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Class index for a multilabel activity vector.
    ///
    /// Vectors that are not a class (three or more active speakers) map to
    /// the class at minimum Hamming distance, lowest index on ties.
    pub fn encode(&self, active: &[bool]) -> Result<usize, PowersetError> {
        if active.len() != self.max_speakers {
            return Err(PowersetError::WrongLength {
                expected: self.max_speakers,
                found: active.len(),
            });
        }
        let n_active = active.iter().filter(|&&a| a).count();
        let mut best = (usize::MAX, 0usize);
        for (idx, class) in self.classes.iter().enumerate() {
            let hits = class.iter().filter(|&&s| active[s]).count();
            // symmetric difference: active-but-absent plus present-but-inactive
            let distance = (n_active - hits) + (class.len() - hits);
            if distance == 0 {
                return Ok(idx);
            }
            if distance < best.0 {
                best = (distance, idx);
            }
        }
        Ok(best.1)
    }

    pub fn decode(&self, index: usize) -> Result<Vec<bool>, PowersetError> {
        let class = self.classes.get(index).ok_or(PowersetError::IndexOutOfRange {
            index,
            size: self.classes.len(),
        })?;
        let mut out = vec![false; self.max_speakers];
        for &s in class {
            out[s] = true;
        }
        Ok(out)
    }

    /// Per-frame argmax (ties to the lowest class index) followed by
    /// [`decode`](Self::decode). `scores` holds one row of `len()` scores per
    /// frame.
    pub fn decode_frames<R: AsRef<[f32]>>(&self, scores: &[R]) -> Result<Vec<Vec<bool>>, PowersetError> {
        scores
            .iter()
            .enumerate()
            .map(|(frame, row)| {
                let row = row.as_ref();
                if row.len() != self.len() {
                    return Err(PowersetError::WrongWidth {
                        expected: self.len(),
                        found: row.len(),
                    });
                }
                let mut best = 0usize;
                for (class, &s) in row.iter().enumerate() {
                    if !s.is_finite() {
                        return Err(PowersetError::NonFinite { frame, class });
                    }
                    if s > row[best] {
                        best = class;
                    }
                }
                self.decode(best)
            })
            .collect()
    }
}

impl fmt::Display for PowersetSpace {
    /// One line per class: `index<TAB>{1,2}` with 1-based speaker numbers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, class) in self.classes.iter().enumerate() {
            let members: Vec<String> = class.iter().map(|s| (s + 1).to_string()).collect();
            writeln!(f, "{idx}\t{{{}}}", members.join(","))?;
        }
        Ok(())
    }
}
