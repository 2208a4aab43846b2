//! CIDEr-D over token streams: per-n tf-idf vectors (n = 1..4), clipped
//! cosine similarity with a Gaussian length penalty (σ = 6), averaged over n
//! and references, scaled by 10.

use std::collections::BTreeMap;

use super::MetricsError;

const MAX_N: usize = 4;
const SIGMA: f64 = 6.0;

type GramKey = Vec<String>;

/// Corpus document frequencies: for each n-gram, the number of videos whose
/// reference set contains it.
#[derive(Debug, Clone)]
pub struct CiderStats {
    doc_freq: BTreeMap<GramKey, usize>,
    num_videos: usize,
}

impl CiderStats {
    /// `refs_per_video[v]` holds all reference token streams of video `v`.
    pub fn from_references<S: AsRef<str>>(
        refs_per_video: &[Vec<Vec<S>>],
    ) -> Result<Self, MetricsError> {
        if refs_per_video.len() < 2 {
            return Err(MetricsError::MissingCorpusStats {
                detail: format!(
                    "document frequencies need at least 2 videos, got {}",
                    refs_per_video.len()
                ),
            });
        }
        let mut doc_freq: BTreeMap<GramKey, usize> = BTreeMap::new();
        for refs in refs_per_video {
            let mut seen: BTreeMap<GramKey, ()> = BTreeMap::new();
            for r in refs {
                for n in 1..=MAX_N {
                    if r.len() < n {
                        continue;
                    }
                    for window in r.windows(n) {
                        let gram: GramKey =
                            window.iter().map(|t| t.as_ref().to_string()).collect();
                        seen.insert(gram, ());
                    }
                }
            }
            for (gram, ()) in seen {
                *doc_freq.entry(gram).or_insert(0) += 1;
            }
        }
        Ok(Self { doc_freq, num_videos: refs_per_video.len() })
    }

    fn idf(&self, gram: &GramKey) -> f64 {
        let df = self.doc_freq.get(gram).copied().unwrap_or(0).max(1);
        (self.num_videos as f64 / df as f64).ln()
    }
}

/// Per-n tf-idf vector and its norm.
fn tfidf_vec<S: AsRef<str>>(tokens: &[S], n: usize, stats: &CiderStats) -> (BTreeMap<GramKey, f64>, f64) {
    let mut vec: BTreeMap<GramKey, f64> = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let gram: GramKey = window.iter().map(|t| t.as_ref().to_string()).collect();
            *vec.entry(gram).or_insert(0.0) += 1.0;
        }
    }
    let mut norm = 0.0;
    for (gram, w) in vec.iter_mut() {
        *w *= stats.idf(gram);
        norm += *w * *w;
    }
    (vec, norm.sqrt())
}

/// CIDEr-D score in `[0, 10]` for one candidate against its references.
pub fn cider_d<S: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<S>],
    stats: &CiderStats,
) -> Result<f64, MetricsError> {
    if references.is_empty() {
        return Err(MetricsError::MissingCorpusStats {
            detail: "cider_d needs at least one reference".to_string(),
        });
    }
    let mut per_n_sum = vec![0.0; MAX_N];
    for reference in references {
        let delta = candidate.len() as f64 - reference.len() as f64;
        let penalty = (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp();
        for n in 1..=MAX_N {
            let (cand_vec, cand_norm) = tfidf_vec(candidate, n, stats);
            let (ref_vec, ref_norm) = tfidf_vec(reference, n, stats);
            let mut dot = 0.0;
            for (gram, &cw) in &cand_vec {
                if let Some(&rw) = ref_vec.get(gram) {
                    // Clipped: candidate mass cannot exceed reference mass.
                    dot += cw.min(rw) * rw;
                }
            }
            let sim = if cand_norm == 0.0 || ref_norm == 0.0 {
                0.0
            } else {
                dot / (cand_norm * ref_norm)
            };
            per_n_sum[n - 1] += sim * penalty;
        }
    }
    let m = references.len() as f64;
    let mean: f64 = per_n_sum.iter().map(|s| s / m).sum::<f64>() / MAX_N as f64;
    Ok(10.0 * mean)
}
