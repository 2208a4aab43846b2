//! BLEU@4 over token streams: clipped modified n-gram precision (n = 1..4),
//! geometric mean, brevity penalty, add-ε smoothing for zero precisions.

use std::collections::BTreeMap;

const MAX_N: usize = 4;
const EPSILON: f64 = 1e-9;

fn gram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let gram: Vec<&str> = window.iter().map(|t| t.as_ref()).collect();
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram precision: candidate counts clipped at the max reference
/// count per gram. Returns (matched, total).
fn clipped_precision<S: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<S>],
    n: usize,
) -> (usize, usize) {
    let cand = gram_counts(candidate, n);
    let total: usize = cand.values().sum();
    let mut matched = 0usize;
    for (gram, &count) in &cand {
        let best_ref = references
            .iter()
            .map(|r| gram_counts(r, n).get(gram).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        matched += count.min(best_ref);
    }
    (matched, total)
}

/// Closest reference length to the candidate length (ties go to the shorter
/// reference).
fn closest_ref_len<S: AsRef<str>>(candidate_len: usize, references: &[Vec<S>]) -> usize {
    let mut best = references[0].len();
    for r in references {
        let d = (r.len() as i64 - candidate_len as i64).abs();
        let bd = (best as i64 - candidate_len as i64).abs();
        if d < bd || (d == bd && r.len() < best) {
            best = r.len();
        }
    }
    best
}

/// BLEU@4 of a candidate token stream against one or more reference streams.
/// Empty candidate scores 0.
pub fn bleu4<S: AsRef<str>>(candidate: &[S], references: &[Vec<S>]) -> f64 {
    assert!(!references.is_empty(), "bleu4 requires at least one reference");
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_N {
        let (matched, total) = clipped_precision(candidate, references, n);
        let p = if total == 0 {
            EPSILON
        } else {
            let p = matched as f64 / total as f64;
            if p == 0.0 {
                EPSILON
            } else {
                p
            }
        };
        log_sum += p.ln() / MAX_N as f64;
    }
    let c = candidate.len();
    let r = closest_ref_len(c, references);
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_sum.exp()
}
