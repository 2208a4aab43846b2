//! Person-word correctness: multiset F1 between predicted and reference
//! person mentions, exact-word or by (gender, plurality) category.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Gender, Plurality};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonMode {
    ExactWord,
    GenderPlurality,
}

/// Fixed person lexicon, extendable from a `word<TAB>gender<TAB>plurality`
/// file. No word may map to two categories.
#[derive(Debug, Clone)]
pub struct PersonLexicon {
    entries: BTreeMap<String, (Gender, Plurality)>,
}

const DEFAULT_ENTRIES: [(&str, Gender, Plurality); 21] = [
    ("man", Gender::Male, Plurality::Single),
    ("men", Gender::Male, Plurality::Plural),
    ("woman", Gender::Female, Plurality::Single),
    ("women", Gender::Female, Plurality::Plural),
    ("girl", Gender::Female, Plurality::Single),
    ("girls", Gender::Female, Plurality::Plural),
    ("boy", Gender::Male, Plurality::Single),
    ("boys", Gender::Male, Plurality::Plural),
    ("guy", Gender::Male, Plurality::Single),
    ("guys", Gender::Male, Plurality::Plural),
    ("person", Gender::Neutral, Plurality::Single),
    ("people", Gender::Neutral, Plurality::Plural),
    ("lady", Gender::Female, Plurality::Single),
    ("ladies", Gender::Female, Plurality::Plural),
    ("child", Gender::Neutral, Plurality::Single),
    ("children", Gender::Neutral, Plurality::Plural),
    ("kid", Gender::Neutral, Plurality::Single),
    ("kids", Gender::Neutral, Plurality::Plural),
    ("he", Gender::Male, Plurality::Single),
    ("she", Gender::Female, Plurality::Single),
    ("they", Gender::Neutral, Plurality::Plural),
];

impl Default for PersonLexicon {
    fn default() -> Self {
        let entries =
            DEFAULT_ENTRIES.iter().map(|(w, g, p)| (w.to_string(), (*g, *p))).collect();
        Self { entries }
    }
}

impl PersonLexicon {
    pub fn lookup(&self, word: &str) -> Option<(Gender, Plurality)> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Extend the default lexicon from a TSV file. A duplicate word with a
    /// conflicting category is an error.
    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), MetricsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricsError::Lexicon { detail: format!("{}: {e}", path.display()) })?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(MetricsError::Lexicon {
                    detail: format!("line {}: expected word<TAB>gender<TAB>plurality", lineno + 1),
                });
            }
            let gender = match parts[1] {
                "male" => Gender::Male,
                "female" => Gender::Female,
                "neutral" => Gender::Neutral,
                other => {
                    return Err(MetricsError::Lexicon {
                        detail: format!("line {}: unknown gender {other:?}", lineno + 1),
                    })
                }
            };
            let plurality = match parts[2] {
                "single" => Plurality::Single,
                "plural" => Plurality::Plural,
                other => {
                    return Err(MetricsError::Lexicon {
                        detail: format!("line {}: unknown plurality {other:?}", lineno + 1),
                    })
                }
            };
            let word = parts[0].to_lowercase();
            if let Some(existing) = self.entries.get(&word) {
                if *existing != (gender, plurality) {
                    return Err(MetricsError::Lexicon {
                        detail: format!("word {word:?} maps to two categories"),
                    });
                }
            }
            self.entries.insert(word, (gender, plurality));
        }
        Ok(())
    }

    /// Multiset of person mentions in a token stream, keyed per mode.
    fn extract<S: AsRef<str>>(&self, tokens: &[S], mode: PersonMode) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in tokens {
            let t = t.as_ref();
            if let Some((g, p)) = self.lookup(t) {
                let key = match mode {
                    PersonMode::ExactWord => t.to_string(),
                    PersonMode::GenderPlurality => format!("{g:?}-{p:?}"),
                };
                *out.entry(key).or_insert(0) += 1;
            }
        }
        out
    }
}

/// One video's prediction tokens and its reference token streams.
pub struct PersonItem<'a, S: AsRef<str>> {
    pub prediction: &'a [S],
    pub references: &'a [Vec<S>],
}

/// Micro-averaged multiset F1 over the corpus. Reference mentions are the
/// multiset union (per-word max) over the video's references.
pub fn person_f1<S: AsRef<str>>(
    items: &[PersonItem<'_, S>],
    lexicon: &PersonLexicon,
    mode: PersonMode,
) -> f64 {
    let mut tp = 0usize;
    let mut pred_total = 0usize;
    let mut ref_total = 0usize;
    for item in items {
        let pred = lexicon.extract(item.prediction, mode);
        let mut refs: BTreeMap<String, usize> = BTreeMap::new();
        for r in item.references {
            for (word, count) in lexicon.extract(r, mode) {
                let e = refs.entry(word).or_insert(0);
                *e = (*e).max(count);
            }
        }
        pred_total += pred.values().sum::<usize>();
        ref_total += refs.values().sum::<usize>();
        for (word, count) in &pred {
            tp += count.min(refs.get(word).unwrap_or(&0));
        }
    }
    if pred_total == 0 || ref_total == 0 {
        return if pred_total == ref_total { 1.0 } else { 0.0 };
    }
    let p = tp as f64 / pred_total as f64;
    let r = tp as f64 / ref_total as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
