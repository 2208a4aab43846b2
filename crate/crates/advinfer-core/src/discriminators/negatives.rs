//! Negative-sample construction for discriminator training.
//!
//! Eight negative kinds cover the three discriminators: mismatched and hard
//! visual negatives, corrupted-language negatives, and incoherent sentence
//! pairs. Every draw is deterministic under the spec's seed, and each call
//! produces an audit record for the reproducibility log.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{encode_sentence, CorpusBundle, Split, TokenId, VideoRecord};
use crate::generator::{sample_sentences, DecoderContext, GeneratorModel};
use crate::substrate::{derive_seed, rng_from};

use super::{content_tokens, DiscError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeKind {
    MismatchedGt,
    MismatchedGen,
    HardSameActivity,
    WordShuffle,
    RepeatPhrase,
    OrderShuffle,
    IdenticalPair,
    TruncatedPair,
}

impl NegativeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NegativeKind::MismatchedGt => "mismatched_gt",
            NegativeKind::MismatchedGen => "mismatched_gen",
            NegativeKind::HardSameActivity => "hard_same_activity",
            NegativeKind::WordShuffle => "word_shuffle",
            NegativeKind::RepeatPhrase => "repeat_phrase",
            NegativeKind::OrderShuffle => "order_shuffle",
            NegativeKind::IdenticalPair => "identical_pair",
            NegativeKind::TruncatedPair => "truncated_pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegativeSpec {
    pub kind: NegativeKind,
    pub seed: u64,
}

/// One constructed negative. Visual-style samples carry the index of the
/// clip (of the video under training) they are mismatched against.
#[derive(Debug, Clone, PartialEq)]
pub enum NegativeSample {
    Sentence(Vec<TokenId>),
    SentenceForClip { clip_index: usize, tokens: Vec<TokenId> },
    Pair { prev: Vec<TokenId>, cur: Vec<TokenId> },
}

/// Reproducibility record: requested and actually-used kind (they differ on
/// fallback), the seed, and the source video ids drawn from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NegativeAudit {
    pub kind: String,
    pub requested: String,
    pub seed: u64,
    pub video_id: String,
    pub source_ids: Vec<String>,
    pub fallback: bool,
}

fn ref_tokens(corpus: &CorpusBundle, video: &VideoRecord, clip: usize, track: usize) -> Vec<TokenId> {
    content_tokens(&encode_sentence(&corpus.vocab, &video.clips[clip].refs[track]))
}

/// Training-split pool excluding the video itself.
fn train_pool<'a>(corpus: &'a CorpusBundle, exclude: &str) -> Vec<&'a VideoRecord> {
    corpus
        .split_videos(Split::Train)
        .into_iter()
        .filter(|v| v.video_id != exclude)
        .collect()
}

fn sample_generated(
    generator: &GeneratorModel,
    video: &VideoRecord,
    clip: usize,
    tau: f64,
    seed: u64,
) -> Result<Vec<TokenId>, DiscError> {
    let ctx = DecoderContext::start(generator.arch.hidden);
    let set = sample_sentences(generator, &video.clips[clip].features, &ctx, 1, tau, seed)
        .map_err(|e| DiscError::Invalid { detail: e.to_string() })?;
    Ok(content_tokens(&set.candidates[0].tokens))
}

fn shuffle_non_identity(rng: &mut ChaCha8Rng, tokens: &[TokenId]) -> Vec<TokenId> {
    let mut out = tokens.to_vec();
    for _ in 0..8 {
        for i in (1..out.len()).rev() {
            let j = rng.gen_range(0..=i);
            out.swap(i, j);
        }
        if out != tokens || tokens.len() < 2 {
            break;
        }
    }
    out
}

fn permutation_non_identity(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        if n < 2 || order.iter().enumerate().any(|(i, &v)| i != v) {
            return order;
        }
    }
}

/// Build negatives of the requested kind for `video`. Hard same-activity
/// negatives fall back to mismatched ground truth when no other video shares
/// the activity; the audit records the fallback.
pub fn make_negatives(
    spec: &NegativeSpec,
    video: &VideoRecord,
    corpus: &CorpusBundle,
    generator: Option<&GeneratorModel>,
    gen_tau: f64,
) -> Result<(Vec<NegativeSample>, NegativeAudit), DiscError> {
    let mut rng = rng_from(derive_seed(spec.seed, &[spec.kind as u64]));
    let mut audit = NegativeAudit {
        kind: spec.kind.as_str().to_string(),
        requested: spec.kind.as_str().to_string(),
        seed: spec.seed,
        video_id: video.video_id.clone(),
        source_ids: Vec::new(),
        fallback: false,
    };

    let samples = match spec.kind {
        NegativeKind::MismatchedGt => {
            let pool = train_pool(corpus, &video.video_id);
            if pool.is_empty() {
                return Err(DiscError::Invalid {
                    detail: "no other video available for mismatched negatives".to_string(),
                });
            }
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let other = pool[rng.gen_range(0..pool.len())];
                let clip = rng.gen_range(0..other.clips.len());
                let track = rng.gen_range(0..2);
                audit.source_ids.push(other.video_id.clone());
                out.push(NegativeSample::SentenceForClip {
                    clip_index: i,
                    tokens: ref_tokens(corpus, other, clip, track),
                });
            }
            out
        }
        NegativeKind::MismatchedGen => {
            let generator = generator.ok_or_else(|| DiscError::Invalid {
                detail: "mismatched_gen negatives require a generator".to_string(),
            })?;
            let pool = train_pool(corpus, &video.video_id);
            if pool.is_empty() {
                return Err(DiscError::Invalid {
                    detail: "no other video available for mismatched negatives".to_string(),
                });
            }
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let other = pool[rng.gen_range(0..pool.len())];
                let clip = rng.gen_range(0..other.clips.len());
                audit.source_ids.push(other.video_id.clone());
                let seed = derive_seed(spec.seed, &[0x6767, i as u64]);
                out.push(NegativeSample::SentenceForClip {
                    clip_index: i,
                    tokens: sample_generated(generator, other, clip, gen_tau, seed)?,
                });
            }
            out
        }
        NegativeKind::HardSameActivity => {
            let pool: Vec<&VideoRecord> = train_pool(corpus, &video.video_id)
                .into_iter()
                .filter(|v| v.activity_id == video.activity_id)
                .collect();
            if pool.is_empty() {
                let fallback_spec = NegativeSpec { kind: NegativeKind::MismatchedGt, seed: spec.seed };
                let (samples, mut inner) = make_negatives(&fallback_spec, video, corpus, generator, gen_tau)?;
                inner.requested = NegativeKind::HardSameActivity.as_str().to_string();
                inner.fallback = true;
                return Ok((samples, inner));
            }
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let other = pool[rng.gen_range(0..pool.len())];
                let clip = rng.gen_range(0..other.clips.len());
                audit.source_ids.push(other.video_id.clone());
                // Pool mixes references with cached generator samples.
                let use_generated = generator.is_some() && rng.gen_range(0..3) == 0;
                let tokens = if use_generated {
                    let seed = derive_seed(spec.seed, &[0x6861, i as u64]);
                    sample_generated(generator.unwrap(), other, clip, gen_tau, seed)?
                } else {
                    ref_tokens(corpus, other, clip, rng.gen_range(0..2))
                };
                out.push(NegativeSample::SentenceForClip { clip_index: i, tokens });
            }
            out
        }
        NegativeKind::WordShuffle => {
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let track = rng.gen_range(0..2);
                let tokens = ref_tokens(corpus, video, i, track);
                out.push(NegativeSample::Sentence(shuffle_non_identity(&mut rng, &tokens)));
            }
            out
        }
        NegativeKind::RepeatPhrase => {
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let track = rng.gen_range(0..2);
                let tokens = ref_tokens(corpus, video, i, track);
                out.push(NegativeSample::Sentence(repeat_span(&mut rng, &tokens)));
            }
            out
        }
        NegativeKind::OrderShuffle => {
            if video.clips.len() < 2 {
                Vec::new()
            } else {
                let track = rng.gen_range(0..2);
                let order = permutation_non_identity(&mut rng, video.clips.len());
                let sentences: Vec<Vec<TokenId>> =
                    order.iter().map(|&c| ref_tokens(corpus, video, c, track)).collect();
                sentences
                    .windows(2)
                    .map(|w| NegativeSample::Pair { prev: w[0].clone(), cur: w[1].clone() })
                    .collect()
            }
        }
        NegativeKind::IdenticalPair => {
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let track = rng.gen_range(0..2);
                let tokens = ref_tokens(corpus, video, i, track);
                out.push(NegativeSample::Pair { prev: tokens.clone(), cur: tokens });
            }
            out
        }
        NegativeKind::TruncatedPair => {
            let mut out = Vec::with_capacity(video.clips.len());
            for i in 0..video.clips.len() {
                let track = rng.gen_range(0..2);
                let tokens = ref_tokens(corpus, video, i, track);
                if tokens.len() < 2 {
                    out.push(NegativeSample::Pair { prev: tokens.clone(), cur: tokens });
                } else {
                    let cut = rng.gen_range(1..tokens.len());
                    out.push(NegativeSample::Pair {
                        prev: tokens.clone(),
                        cur: tokens[..cut].to_vec(),
                    });
                }
            }
            out
        }
    };
    Ok((samples, audit))
}

/// Duplicate a random 2–4 token span in place; output capped at the
/// 30-token sentence limit.
fn repeat_span(rng: &mut ChaCha8Rng, tokens: &[TokenId]) -> Vec<TokenId> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let span = rng.gen_range(2..=4usize).min(tokens.len());
    let start = rng.gen_range(0..=tokens.len() - span);
    let mut out = Vec::with_capacity(tokens.len() + span);
    out.extend_from_slice(&tokens[..start + span]);
    out.extend_from_slice(&tokens[start..start + span]);
    out.extend_from_slice(&tokens[start + span..]);
    out.truncate(crate::corpus::MAX_SENTENCE_TOKENS);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bow_vector, detokenize, gen_synthetic_corpus, CorpusSpec, FeatureDims};

    fn fixture() -> CorpusBundle {
        let spec = CorpusSpec {
            num_videos: 10,
            clip_range: (2, 4),
            num_events: 4,
            num_activities: 2,
            noise_sigma: 0.1,
            feature_dims: FeatureDims { motion: 8, appearance: 8, objects: 10 },
        };
        gen_synthetic_corpus(&spec, 50).unwrap()
    }

    fn train_video(bundle: &CorpusBundle) -> &VideoRecord {
        bundle.split_videos(Split::Train)[0]
    }

    #[test]
    fn factory_is_deterministic() {
        let bundle = fixture();
        let video = train_video(&bundle);
        for kind in [
            NegativeKind::MismatchedGt,
            NegativeKind::WordShuffle,
            NegativeKind::RepeatPhrase,
            NegativeKind::OrderShuffle,
            NegativeKind::IdenticalPair,
            NegativeKind::TruncatedPair,
        ] {
            let spec = NegativeSpec { kind, seed: 12 };
            let (a, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
            let (b, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
            assert_eq!(a, b, "kind {kind:?} not deterministic");
        }
    }

    #[test]
    fn word_shuffle_preserves_bow_exactly() {
        let bundle = fixture();
        let video = train_video(&bundle);
        let spec = NegativeSpec { kind: NegativeKind::WordShuffle, seed: 3 };
        let (samples, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
        for (i, sample) in samples.iter().enumerate() {
            let NegativeSample::Sentence(shuffled) = sample else { panic!("wrong shape") };
            // One of the two reference tracks must match as a multiset.
            let bows: Vec<Vec<f64>> = (0..2)
                .map(|t| bow_vector(&bundle.vocab, &ref_tokens(&bundle, video, i, t)))
                .collect();
            let got = bow_vector(&bundle.vocab, shuffled);
            assert!(bows.contains(&got));
        }
    }

    #[test]
    fn identical_pair_is_literally_identical() {
        let bundle = fixture();
        let video = train_video(&bundle);
        let spec = NegativeSpec { kind: NegativeKind::IdenticalPair, seed: 8 };
        let (samples, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
        for sample in samples {
            let NegativeSample::Pair { prev, cur } = sample else { panic!("wrong shape") };
            assert_eq!(prev, cur);
        }
    }

    #[test]
    fn truncated_pair_cuts_off_the_ending() {
        let bundle = fixture();
        let video = train_video(&bundle);
        for seed in 0..10 {
            let spec = NegativeSpec { kind: NegativeKind::TruncatedPair, seed };
            let (samples, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
            for sample in samples {
                let NegativeSample::Pair { prev, cur } = sample else { panic!("wrong shape") };
                assert!(cur.len() < prev.len());
                assert_eq!(&prev[..cur.len()], cur.as_slice());
            }
        }
    }

    #[test]
    fn truncated_pair_reproduces_the_documented_example() {
        // "a person enters and takes a chair" truncated to "a person enters"
        // arises at some fixed seed: the cut point is uniform over the six
        // interior positions.
        let mut bundle = fixture();
        let tokens = ["a", "person", "enters", "and", "takes", "chair"];
        let vocab = crate::corpus::Vocabulary::from_tokens(tokens);
        bundle.vocab = vocab;
        let mut video = train_video(&bundle).clone();
        video.clips.truncate(1);
        video.clips[0].refs = [
            "a person enters and takes a chair".to_string(),
            "a person enters and takes a chair".to_string(),
        ];
        let target = "a person enters";
        let found = (0..64).any(|seed| {
            let spec = NegativeSpec { kind: NegativeKind::TruncatedPair, seed };
            let (samples, _) = make_negatives(&spec, &video, &bundle, None, 1.0).unwrap();
            samples.iter().any(|s| match s {
                NegativeSample::Pair { cur, .. } => detokenize(&bundle.vocab, cur) == target,
                _ => false,
            })
        });
        assert!(found, "no seed in 0..64 produced the documented truncation");
    }

    #[test]
    fn order_shuffle_pairs_come_from_a_non_identity_permutation() {
        let bundle = fixture();
        let video = train_video(&bundle);
        let spec = NegativeSpec { kind: NegativeKind::OrderShuffle, seed: 4 };
        let (samples, _) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
        assert_eq!(samples.len(), video.clips.len() - 1);
        // The pair sequence differs from both in-order reference tracks.
        let in_order: Vec<Vec<Vec<TokenId>>> = (0..2)
            .map(|t| (0..video.clips.len()).map(|c| ref_tokens(&bundle, video, c, t)).collect())
            .collect();
        let firsts: Vec<&Vec<TokenId>> = samples
            .iter()
            .map(|s| match s {
                NegativeSample::Pair { prev, .. } => prev,
                _ => panic!("wrong shape"),
            })
            .collect();
        let matches_in_order = in_order.iter().any(|track| {
            firsts.iter().zip(track.iter()).all(|(a, b)| *a == b)
        });
        assert!(!matches_in_order);
    }

    #[test]
    fn hard_negative_falls_back_when_activity_is_unique() {
        // Single-activity corpus where we retag one video to a unique
        // activity id: hard negatives must fall back to mismatched_gt.
        let mut bundle = fixture();
        let idx = bundle.splits.train[0];
        bundle.videos[idx].activity_id = 999;
        let video = bundle.videos[idx].clone();
        let spec = NegativeSpec { kind: NegativeKind::HardSameActivity, seed: 5 };
        let (samples, audit) = make_negatives(&spec, &video, &bundle, None, 1.0).unwrap();
        assert!(!samples.is_empty());
        assert!(audit.fallback);
        assert_eq!(audit.requested, "hard_same_activity");
        assert_eq!(audit.kind, "mismatched_gt");
    }

    #[test]
    fn hard_negatives_share_the_activity() {
        let bundle = fixture();
        let video = train_video(&bundle);
        let spec = NegativeSpec { kind: NegativeKind::HardSameActivity, seed: 6 };
        let (_, audit) = make_negatives(&spec, video, &bundle, None, 1.0).unwrap();
        if !audit.fallback {
            for src in &audit.source_ids {
                let other = bundle.video_by_id(src).unwrap();
                assert_eq!(other.activity_id, video.activity_id);
                assert_ne!(other.video_id, video.video_id);
            }
        }
    }

    #[test]
    fn mismatched_gen_requires_generator() {
        let bundle = fixture();
        let video = train_video(&bundle);
        let spec = NegativeSpec { kind: NegativeKind::MismatchedGen, seed: 2 };
        assert!(make_negatives(&spec, video, &bundle, None, 1.0).is_err());
    }

    #[test]
    fn repeat_phrase_duplicates_a_span() {
        let mut rng = rng_from(1);
        let tokens: Vec<TokenId> = (10..20).collect();
        let out = repeat_span(&mut rng, &tokens);
        assert!(out.len() > tokens.len());
        assert!(out.len() <= tokens.len() + 4);
    }
}
