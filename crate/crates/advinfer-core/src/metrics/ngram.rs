//! N-gram diversity and repetition statistics.
//!
//! N-gram windows never cross sentence boundaries; a flat token list is
//! treated as a single sentence. Diversity (Div-N) divides unique N-grams by
//! the total word count; repetition (RE-N) is the repeated-occurrence mass
//! over the total N-gram count.

use std::collections::BTreeMap;

type Gram<'a> = Vec<&'a str>;

fn gram_counts<'a, S: AsRef<str>>(sentences: &'a [Vec<S>], n: usize) -> BTreeMap<Gram<'a>, usize> {
    let mut counts = BTreeMap::new();
    for sentence in sentences {
        if sentence.len() < n {
            continue;
        }
        for window in sentence.windows(n) {
            let gram: Gram = window.iter().map(|t| t.as_ref()).collect();
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn total_words<S: AsRef<str>>(sentences: &[Vec<S>]) -> usize {
    sentences.iter().map(|s| s.len()).sum()
}

/// Ratio of unique n-grams (n = 1 or 2) to the total number of words.
/// Empty input is 0 by convention.
pub fn div_n<S: AsRef<str>>(sentences: &[Vec<S>], n: usize) -> f64 {
    let words = total_words(sentences);
    if words == 0 {
        return 0.0;
    }
    let unique = gram_counts(sentences, n).len();
    unique as f64 / words as f64
}

/// Repeated n-gram mass: `Σ_g max(count(g) − 1, 0) / Σ_g count(g)`; 0 when
/// there are no n-grams at all.
pub fn re_n<S: AsRef<str>>(sentences: &[Vec<S>], n: usize) -> f64 {
    let counts = gram_counts(sentences, n);
    let total: usize = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let repeated: usize = counts.values().map(|c| c - 1).sum();
    repeated as f64 / total as f64
}

/// Single flat token stream treated as one sentence.
pub fn div_n_stream<S: AsRef<str> + Clone>(tokens: &[S], n: usize) -> f64 {
    div_n(&[tokens.to_vec()], n)
}

pub fn re_n_stream<S: AsRef<str> + Clone>(tokens: &[S], n: usize) -> f64 {
    re_n(&[tokens.to_vec()], n)
}

/// Mean RE-4 over activities: all sentences predicted for an activity are
/// pooled, scored together, and the per-activity scores averaged. Activities
/// with no predictions are skipped; returns 0 if none remain.
pub fn re4_per_activity<S: AsRef<str>>(groups: &BTreeMap<u32, Vec<Vec<S>>>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for sentences in groups.values() {
        if sentences.iter().all(|s| s.is_empty()) && sentences.is_empty() {
            continue;
        }
        if sentences.is_empty() {
            continue;
        }
        sum += re_n(sentences, 4);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
