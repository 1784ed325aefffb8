//! Reduced products of projector symbols indexing moment-matrix rows and
//! columns.
//!
//! Letters are (setting, outcome) pairs of one party's projective
//! measurements, with the last outcome of every setting eliminated through
//! completeness. Words reduce under idempotence (adjacent equal letters
//! collapse) and orthogonality (adjacent letters with equal setting but
//! different outcomes annihilate the word).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One projector symbol E_{outcome|setting}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub setting: u8,
    pub outcome: u8,
}

/// A reduced product of projector symbols; the empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorWord {
    letters: Vec<Letter>,
}

/// Result of a reduction: either the zero operator or a reduced word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reduced {
    Zero,
    Word(OperatorWord),
}

impl OperatorWord {
    pub fn identity() -> Self {
        Self { letters: Vec::new() }
    }

    pub fn single(setting: u8, outcome: u8) -> Self {
        Self { letters: vec![Letter { setting, outcome }] }
    }

    /// Builds from letters, applying the reduction rules.
    pub fn reduce(letters: impl IntoIterator<Item = Letter>) -> Reduced {
        let mut stack: Vec<Letter> = Vec::new();
        for l in letters {
            match stack.last() {
                Some(top) if top.setting == l.setting => {
                    if top.outcome == l.outcome {
                        // Idempotent: E E = E.
                        continue;
                    }
                    // Orthogonal: E_{b|y} E_{b'|y} = 0 for b != b'.
                    return Reduced::Zero;
                }
                _ => stack.push(l),
            }
        }
        Reduced::Word(Self { letters: stack })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// The adjoint word (projectors are self-adjoint, so just the reversal).
    pub fn reversed(&self) -> Self {
        let mut letters = self.letters.clone();
        letters.reverse();
        Self { letters }
    }

    /// Product w1 . w2 with reduction.
    pub fn concat(&self, other: &Self) -> Reduced {
        Self::reduce(self.letters.iter().chain(other.letters.iter()).copied())
    }

    /// Canonical representative of {w, reversed(w)}: real unknowns identify
    /// a moment with its adjoint, and the lexicographically smaller word
    /// keys the symbol.
    pub fn canonical(&self) -> Self {
        let rev = self.reversed();
        if self.cmp_key() <= rev.cmp_key() {
            self.clone()
        } else {
            rev
        }
    }

    fn cmp_key(&self) -> (usize, &[Letter]) {
        (self.letters.len(), &self.letters)
    }
}

impl PartialOrd for OperatorWord {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OperatorWord {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cmp_key().cmp(&other.cmp_key())
    }
}

/// Classification of a reduced moment-matrix entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntrySymbol {
    /// Annihilated by orthogonality.
    Zero,
    /// The empty word: the trace of the underlying operator.
    Normalization,
    /// A single projector: an observable probability.
    Probability { setting: u8, outcome: u8 },
    /// Anything longer, keyed by its canonical word.
    Unknown(OperatorWord),
}

pub fn classify(reduced: Reduced) -> EntrySymbol {
    match reduced {
        Reduced::Zero => EntrySymbol::Zero,
        Reduced::Word(w) => {
            if w.is_empty() {
                EntrySymbol::Normalization
            } else if w.len() == 1 {
                let l = w.letters()[0];
                EntrySymbol::Probability { setting: l.setting, outcome: l.outcome }
            } else {
                EntrySymbol::Unknown(w.canonical())
            }
        }
    }
}

/// All reduced words of length at most `level` over the letters of one
/// party (`n_settings` settings, outcomes `0..n_outcomes-1` per setting),
/// ordered by length then lexicographically, starting with the identity.
pub fn enumerate_words(
    n_settings: usize,
    n_outcomes: usize,
    level: usize,
    cap: usize,
) -> Result<Vec<OperatorWord>> {
    if level == 0 {
        return Err(Error::InvalidArgument("word level must be >= 1".into()));
    }
    let letters: Vec<Letter> = (0..n_settings)
        .flat_map(|y| {
            (0..n_outcomes.saturating_sub(1))
                .map(move |b| Letter { setting: y as u8, outcome: b as u8 })
        })
        .collect();
    let mut words = vec![OperatorWord::identity()];
    let mut frontier = vec![OperatorWord::identity()];
    for _ in 0..level {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                if w.letters().last().map(|t| t.setting == l.setting).unwrap_or(false) {
                    // Would reduce (equal outcome) or vanish (different
                    // outcome): never a new reduced word.
                    continue;
                }
                let mut ls = w.letters().to_vec();
                ls.push(l);
                next.push(OperatorWord { letters: ls });
            }
        }
        words.extend(next.iter().cloned());
        if words.len() > cap {
            return Err(Error::Overflow(format!(
                "word count {} exceeds the cap of {cap}",
                words.len()
            )));
        }
        frontier = next;
    }
    words.sort();
    words.dedup();
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(pairs: &[(u8, u8)]) -> OperatorWord {
        match OperatorWord::reduce(pairs.iter().map(|&(s, o)| Letter { setting: s, outcome: o }))
        {
            Reduced::Word(w) => w,
            Reduced::Zero => panic!("unexpected zero"),
        }
    }

    #[test]
    fn reduction_rules() {
        // Idempotence collapses equal adjacent letters.
        assert_eq!(w(&[(0, 0), (0, 0)]), w(&[(0, 0)]));
        // Orthogonality maps to zero.
        assert_eq!(
            OperatorWord::reduce([Letter { setting: 0, outcome: 0 }, Letter {
                setting: 0,
                outcome: 1
            }]),
            Reduced::Zero
        );
        // Cascade: collapsing may expose a new reduction.
        assert_eq!(w(&[(0, 0), (1, 0), (1, 0), (0, 0)]), w(&[(0, 0), (1, 0), (0, 0)]));
        assert_eq!(
            OperatorWord::reduce(
                [(0u8, 0u8), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(s, o)| Letter { setting: s, outcome: o })
            ),
            Reduced::Zero
        );
    }

    #[test]
    fn canonicalization_prefers_lexicographic_smaller() {
        let fwd = w(&[(0, 0), (1, 0)]);
        let bwd = w(&[(1, 0), (0, 0)]);
        assert_eq!(fwd.canonical(), fwd);
        assert_eq!(bwd.canonical(), fwd);
        // Palindromes are their own canonical form.
        let pal = w(&[(0, 0), (1, 0), (0, 0)]);
        assert_eq!(pal.canonical(), pal);
    }

    #[test]
    fn level_one_word_counts() {
        // n_y = n_b = 2: {1, E_{0|0}, E_{0|1}}.
        let ws = enumerate_words(2, 2, 1, 256).unwrap();
        assert_eq!(ws.len(), 3);
        assert_eq!(ws[0], OperatorWord::identity());
        // n_y = 3, n_b = 2 at level 1: 4 words.
        assert_eq!(enumerate_words(3, 2, 1, 256).unwrap().len(), 4);
        // 3 outcomes contribute two letters per setting.
        assert_eq!(enumerate_words(2, 3, 1, 256).unwrap().len(), 5);
    }

    #[test]
    fn level_growth_binary_two_settings() {
        // Alternating-setting words: 1 + 2*level.
        for level in 1..=5 {
            let ws = enumerate_words(2, 2, level, 256).unwrap();
            assert_eq!(ws.len(), 1 + 2 * level, "level {level}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(enumerate_words(4, 4, 5, 256), Err(Error::Overflow(_))));
    }

    #[test]
    fn classify_cases() {
        assert_eq!(classify(Reduced::Zero), EntrySymbol::Zero);
        assert_eq!(
            classify(Reduced::Word(OperatorWord::identity())),
            EntrySymbol::Normalization
        );
        assert_eq!(
            classify(Reduced::Word(OperatorWord::single(1, 0))),
            EntrySymbol::Probability { setting: 1, outcome: 0 }
        );
        let u = classify(Reduced::Word(w(&[(1, 0), (0, 0)])));
        assert_eq!(u, EntrySymbol::Unknown(w(&[(0, 0), (1, 0)])));
    }
}
