//! Discriminator training: positives are reference sentences, negatives mix
//! randomly-chosen kinds per video, and the objective is
//! `E_pos[log D] + μ·E_gen[log(1−D)] + ν·E_mismatch[log(1−D)]`, maximized
//! with Adam. Generated negatives are sampled at the training temperature
//! (1.0 by default); the visual discriminator adds hard same-activity
//! negatives only after its warm-up epochs.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::{encode_sentence, ClipFeatures, CorpusBundle, Split, TokenId, VideoRecord};
use crate::generator::{sample_sentences, DecoderContext, GeneratorModel};
use crate::substrate::{adam_step, derive_seed, rng_from, AdamConfig, Graph, Var};

use super::negatives::{make_negatives, NegativeAudit, NegativeKind, NegativeSample, NegativeSpec};
use super::{content_tokens, DiscError, DiscKind, Discriminator};

#[derive(Debug, Clone)]
pub struct DiscTrainConfig {
    pub mu: f64,
    pub nu: f64,
    pub lr: f64,
    /// Sampling temperature for generated negatives.
    pub gen_tau: f64,
    pub epochs: usize,
    /// Hard same-activity negatives join after this many epochs.
    pub hard_negatives_after: usize,
    pub seed: u64,
}

impl Default for DiscTrainConfig {
    fn default() -> Self {
        Self { mu: 0.5, nu: 0.5, lr: 5e-4, gen_tau: 1.0, epochs: 6, hard_negatives_after: 2, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EpochAccuracy {
    pub epoch: usize,
    pub per_kind: BTreeMap<String, f64>,
    pub pooled: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DiscTrainOutput {
    pub accuracy_curves: Vec<EpochAccuracy>,
    /// Used negative kinds per epoch (mixing-contract counters).
    pub negative_counts: Vec<BTreeMap<String, usize>>,
    pub audits: Vec<NegativeAudit>,
    pub skipped_batches: usize,
}

/// Eq.-style objective value from plain score lists; empty buckets
/// contribute nothing. Supremum is 0 (perfect discriminator).
pub fn disc_objective(pos: &[f64], gen_neg: &[f64], mismatch_neg: &[f64], mu: f64, nu: f64) -> f64 {
    let mean_ln = |xs: &[f64], flip: bool| -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        xs.iter().map(|d| if flip { (1.0 - d).ln() } else { d.ln() }).sum::<f64>() / xs.len() as f64
    };
    mean_ln(pos, false) + mu * mean_ln(gen_neg, true) + nu * mean_ln(mismatch_neg, true)
}

/// A scoreable training instance for whichever discriminator is in play.
#[derive(Debug, Clone)]
pub(crate) enum Instance {
    Vis { tokens: Vec<TokenId>, clip: ClipFeatures },
    Lang { tokens: Vec<TokenId> },
    Pair { prev: Vec<TokenId>, cur: Vec<TokenId> },
}

impl Discriminator {
    pub(crate) fn score_instance_graph(
        &self,
        g: &mut Graph,
        vocab: &crate::corpus::Vocabulary,
        inst: &Instance,
    ) -> Result<Var, DiscError> {
        match (self, inst) {
            (Discriminator::Visual(d), Instance::Vis { tokens, clip }) => {
                d.score_graph(g, vocab, tokens, clip)
            }
            (Discriminator::Single(d), Instance::Vis { tokens, clip }) => {
                d.score_graph(g, tokens, clip)
            }
            (Discriminator::Language(d), Instance::Lang { tokens }) => d.score_graph(g, tokens),
            (Discriminator::Pairwise(d), Instance::Pair { prev, cur }) => {
                d.score_graph(g, prev, cur)
            }
            _ => Err(DiscError::Invalid {
                detail: format!("instance shape does not fit a {} discriminator", self.kind().as_str()),
            }),
        }
    }

    pub(crate) fn score_instance(
        &self,
        vocab: &crate::corpus::Vocabulary,
        inst: &Instance,
    ) -> Result<f64, DiscError> {
        let mut g = Graph::new();
        let s = self.score_instance_graph(&mut g, vocab, inst)?;
        Ok(g.value(s).item())
    }
}

/// Positive instances of a video for one discriminator kind: each of the two
/// references is a positive.
pub(crate) fn positive_instances(
    kind: DiscKind,
    corpus: &CorpusBundle,
    video: &VideoRecord,
) -> Vec<Instance> {
    let toks = |clip: usize, track: usize| {
        content_tokens(&encode_sentence(&corpus.vocab, &video.clips[clip].refs[track]))
    };
    let mut out = Vec::new();
    match kind {
        DiscKind::Visual | DiscKind::Single => {
            for (i, clip) in video.clips.iter().enumerate() {
                for track in 0..2 {
                    out.push(Instance::Vis { tokens: toks(i, track), clip: clip.features.clone() });
                }
            }
        }
        DiscKind::Language => {
            for i in 0..video.clips.len() {
                for track in 0..2 {
                    out.push(Instance::Lang { tokens: toks(i, track) });
                }
            }
        }
        DiscKind::Pairwise => {
            for track in 0..2 {
                for i in 1..video.clips.len() {
                    out.push(Instance::Pair { prev: toks(i - 1, track), cur: toks(i, track) });
                }
            }
        }
    }
    out
}

/// Factory kinds in the generated-sample bucket (μ weight). Empty means the
/// bucket is filled with same-video generator samples produced inline.
fn mu_kinds(kind: DiscKind) -> &'static [NegativeKind] {
    match kind {
        DiscKind::Visual => &[NegativeKind::MismatchedGen],
        DiscKind::Language | DiscKind::Single => &[],
        DiscKind::Pairwise => &[NegativeKind::IdenticalPair, NegativeKind::TruncatedPair],
    }
}

/// Factory kinds in the mismatch bucket (ν weight).
fn nu_kinds(kind: DiscKind, include_hard: bool) -> Vec<NegativeKind> {
    match kind {
        DiscKind::Visual => {
            let mut v = vec![NegativeKind::MismatchedGt];
            if include_hard {
                v.push(NegativeKind::HardSameActivity);
            }
            v
        }
        DiscKind::Language => vec![NegativeKind::WordShuffle, NegativeKind::RepeatPhrase],
        DiscKind::Pairwise => vec![NegativeKind::OrderShuffle],
        DiscKind::Single => vec![NegativeKind::MismatchedGt],
    }
}

pub(crate) const GEN_SAME_VIDEO: &str = "gen_same_video";

fn needs_generator(kind: DiscKind) -> bool {
    matches!(kind, DiscKind::Visual | DiscKind::Language | DiscKind::Single)
}

fn samples_to_instances(
    kind: DiscKind,
    video: &VideoRecord,
    samples: Vec<NegativeSample>,
) -> Vec<Instance> {
    samples
        .into_iter()
        .filter_map(|s| match (kind, s) {
            (DiscKind::Visual | DiscKind::Single, NegativeSample::SentenceForClip { clip_index, tokens }) => {
                (!tokens.is_empty()).then(|| Instance::Vis {
                    tokens,
                    clip: video.clips[clip_index].features.clone(),
                })
            }
            (DiscKind::Language, NegativeSample::Sentence(tokens))
            | (DiscKind::Language, NegativeSample::SentenceForClip { tokens, .. }) => {
                (!tokens.is_empty()).then_some(Instance::Lang { tokens })
            }
            (DiscKind::Pairwise, NegativeSample::Pair { prev, cur }) => {
                (!prev.is_empty() && !cur.is_empty()).then_some(Instance::Pair { prev, cur })
            }
            _ => None,
        })
        .collect()
}

/// Same-video generator samples (the S_G bucket for the language and single
/// discriminators).
fn gen_same_video_instances(
    kind: DiscKind,
    generator: &GeneratorModel,
    video: &VideoRecord,
    tau: f64,
    seed: u64,
) -> Result<(Vec<Instance>, NegativeAudit), DiscError> {
    let mut out = Vec::with_capacity(video.clips.len());
    for (i, clip) in video.clips.iter().enumerate() {
        let ctx = DecoderContext::start(generator.arch.hidden);
        let set = sample_sentences(generator, &clip.features, &ctx, 1, tau, derive_seed(seed, &[i as u64]))
            .map_err(|e| DiscError::Invalid { detail: e.to_string() })?;
        let tokens = content_tokens(&set.candidates[0].tokens);
        if tokens.is_empty() {
            continue;
        }
        out.push(match kind {
            DiscKind::Language => Instance::Lang { tokens },
            _ => Instance::Vis { tokens, clip: clip.features.clone() },
        });
    }
    let audit = NegativeAudit {
        kind: GEN_SAME_VIDEO.to_string(),
        requested: GEN_SAME_VIDEO.to_string(),
        seed,
        video_id: video.video_id.clone(),
        source_ids: vec![video.video_id.clone()],
        fallback: false,
    };
    Ok((out, audit))
}

pub(crate) struct VideoBatch {
    pub(crate) positives: Vec<Instance>,
    pub(crate) gen_bucket: Vec<Instance>,
    pub(crate) mismatch_bucket: Vec<Instance>,
    pub(crate) audits: Vec<NegativeAudit>,
    pub(crate) used_kinds: Vec<String>,
}

pub(crate) fn build_batch(
    disc_kind: DiscKind,
    corpus: &CorpusBundle,
    video: &VideoRecord,
    generator: Option<&GeneratorModel>,
    cfg: &DiscTrainConfig,
    include_hard: bool,
    rng: &mut rand_chacha::ChaCha8Rng,
    neg_seed: u64,
) -> Result<VideoBatch, DiscError> {
    let positives = positive_instances(disc_kind, corpus, video);
    let mut audits = Vec::new();
    let mut used_kinds = Vec::new();

    let mu = mu_kinds(disc_kind);
    let gen_bucket = if mu.is_empty() {
        let generator = generator.expect("validated by train_discriminator");
        let (insts, audit) = gen_same_video_instances(
            disc_kind,
            generator,
            video,
            cfg.gen_tau,
            derive_seed(neg_seed, &[1]),
        )?;
        used_kinds.push(audit.kind.clone());
        audits.push(audit);
        insts
    } else {
        let kind = mu[rng.gen_range(0..mu.len())];
        let spec = NegativeSpec { kind, seed: derive_seed(neg_seed, &[1]) };
        let (samples, audit) = make_negatives(&spec, video, corpus, generator, cfg.gen_tau)?;
        used_kinds.push(audit.kind.clone());
        audits.push(audit);
        samples_to_instances(disc_kind, video, samples)
    };

    let nu = nu_kinds(disc_kind, include_hard);
    let kind = nu[rng.gen_range(0..nu.len())];
    let spec = NegativeSpec { kind, seed: derive_seed(neg_seed, &[2]) };
    let (samples, audit) = make_negatives(&spec, video, corpus, generator, cfg.gen_tau)?;
    used_kinds.push(audit.kind.clone());
    audits.push(audit);
    let mismatch_bucket = samples_to_instances(disc_kind, video, samples);

    Ok(VideoBatch { positives, gen_bucket, mismatch_bucket, audits, used_kinds })
}

/// Graph for one video's objective; returns `-L` to minimize.
pub(crate) fn batch_loss_graph(
    g: &mut Graph,
    disc: &Discriminator,
    vocab: &crate::corpus::Vocabulary,
    batch: &VideoBatch,
    cfg: &DiscTrainConfig,
) -> Result<Var, DiscError> {
    let mean_ln = |g: &mut Graph,
                   disc: &Discriminator,
                   insts: &[Instance],
                   flip: bool|
     -> Result<Option<Var>, DiscError> {
        if insts.is_empty() {
            return Ok(None);
        }
        let mut total: Option<Var> = None;
        for inst in insts {
            let s = disc.score_instance_graph(g, vocab, inst)?;
            let arg = if flip {
                let one = g.constant(crate::substrate::Tensor::scalar(1.0))?;
                g.sub(one, s)?
            } else {
                s
            };
            let ln = g.ln(arg)?;
            total = Some(match total {
                Some(t) => g.add(t, ln)?,
                None => ln,
            });
        }
        Ok(Some(g.scale(total.unwrap(), 1.0 / insts.len() as f64)?))
    };

    let pos = mean_ln(g, disc, &batch.positives, false)?.expect("nonempty positives");
    let mut objective = pos;
    if let Some(gen) = mean_ln(g, disc, &batch.gen_bucket, true)? {
        let weighted = g.scale(gen, cfg.mu)?;
        objective = g.add(objective, weighted)?;
    }
    if let Some(mis) = mean_ln(g, disc, &batch.mismatch_bucket, true)? {
        let weighted = g.scale(mis, cfg.nu)?;
        objective = g.add(objective, weighted)?;
    }
    Ok(g.scale(objective, -1.0)?)
}

/// Train one discriminator over the train split.
pub fn train_discriminator(
    disc: &mut Discriminator,
    corpus: &CorpusBundle,
    generator: Option<&GeneratorModel>,
    cfg: &DiscTrainConfig,
) -> Result<DiscTrainOutput, DiscError> {
    let kind = disc.kind();
    if needs_generator(kind) && generator.is_none() {
        return Err(DiscError::Invalid {
            detail: format!("{} discriminator training requires a pre-trained generator", kind.as_str()),
        });
    }
    let videos = corpus.split_videos(Split::Train);
    if videos.is_empty() {
        return Err(DiscError::Invalid { detail: "empty train split".to_string() });
    }
    let val = corpus.split_videos(Split::Val);
    let adam = AdamConfig::new(cfg.lr);
    let mut out = DiscTrainOutput::default();

    for epoch in 0..cfg.epochs {
        let snapshot = disc.store().clone();
        let include_hard = kind == DiscKind::Visual && epoch >= cfg.hard_negatives_after;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut order: Vec<usize> = (0..videos.len()).collect();
        let mut rng = rng_from(derive_seed(cfg.seed, &[0x64657030, epoch as u64]));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for &vi in &order {
            let video = videos[vi];
            let neg_seed = derive_seed(cfg.seed, &[0x6e6567, epoch as u64, vi as u64]);
            let batch =
                build_batch(kind, corpus, video, generator, cfg, include_hard, &mut rng, neg_seed)?;
            if batch.positives.is_empty()
                || (batch.gen_bucket.is_empty() && batch.mismatch_bucket.is_empty())
            {
                out.skipped_batches += 1;
                continue;
            }
            for k in &batch.used_kinds {
                *counts.entry(k.clone()).or_insert(0) += 1;
            }
            out.audits.extend(batch.audits.iter().cloned());
            let step = (|| -> Result<(), DiscError> {
                let mut g = Graph::new();
                let loss = batch_loss_graph(&mut g, disc, &corpus.vocab, &batch, cfg)?;
                let grads = g.backward(loss)?;
                adam_step(disc.store_mut(), &grads, &adam)?;
                Ok(())
            })();
            if let Err(err) = step {
                *disc.store_mut() = snapshot;
                return Err(DiscError::Diverged { epoch, detail: err.to_string() });
            }
        }
        let eval_kinds = own_eval_kinds(kind, include_hard);
        let acc = held_out_accuracy(
            disc,
            corpus,
            &val,
            generator,
            &eval_kinds,
            cfg.gen_tau,
            derive_seed(cfg.seed, &[0x6576616c, epoch as u64]),
        )?;
        out.accuracy_curves.push(EpochAccuracy {
            epoch,
            pooled: acc.pooled,
            per_kind: acc.per_kind,
        });
        out.negative_counts.push(counts);
    }
    Ok(out)
}

/// The negative kinds a discriminator is evaluated against (its "own"
/// kinds). `gen_same_video` is a pseudo-kind for the inline bucket.
pub fn own_eval_kinds(kind: DiscKind, include_hard: bool) -> Vec<String> {
    let mut v: Vec<String> = match kind {
        DiscKind::Visual => {
            let mut k = vec![
                NegativeKind::MismatchedGt.as_str().to_string(),
                NegativeKind::MismatchedGen.as_str().to_string(),
            ];
            if include_hard {
                k.push(NegativeKind::HardSameActivity.as_str().to_string());
            }
            k
        }
        DiscKind::Language => vec![
            GEN_SAME_VIDEO.to_string(),
            NegativeKind::WordShuffle.as_str().to_string(),
            NegativeKind::RepeatPhrase.as_str().to_string(),
        ],
        DiscKind::Pairwise => vec![
            NegativeKind::OrderShuffle.as_str().to_string(),
            NegativeKind::IdenticalPair.as_str().to_string(),
            NegativeKind::TruncatedPair.as_str().to_string(),
        ],
        DiscKind::Single => vec![
            GEN_SAME_VIDEO.to_string(),
            NegativeKind::MismatchedGt.as_str().to_string(),
        ],
    };
    v.sort();
    v
}

#[derive(Debug, Clone)]
pub struct AccuracyReport {
    pub per_kind: BTreeMap<String, f64>,
    /// Accuracy pooled over positives (counted once) and all requested
    /// negative kinds, at threshold 0.5.
    pub pooled: f64,
}

fn kind_from_str(s: &str) -> Option<NegativeKind> {
    use NegativeKind::*;
    Some(match s {
        "mismatched_gt" => MismatchedGt,
        "mismatched_gen" => MismatchedGen,
        "hard_same_activity" => HardSameActivity,
        "word_shuffle" => WordShuffle,
        "repeat_phrase" => RepeatPhrase,
        "order_shuffle" => OrderShuffle,
        "identical_pair" => IdenticalPair,
        "truncated_pair" => TruncatedPair,
        _ => return None,
    })
}

/// Threshold-0.5 classification accuracy on held-out videos: positives above
/// threshold, each requested negative kind below it.
#[allow(clippy::too_many_arguments)]
pub fn held_out_accuracy(
    disc: &Discriminator,
    corpus: &CorpusBundle,
    videos: &[&VideoRecord],
    generator: Option<&GeneratorModel>,
    kinds: &[String],
    gen_tau: f64,
    seed: u64,
) -> Result<AccuracyReport, DiscError> {
    let disc_kind = disc.kind();
    let mut pos_correct = 0usize;
    let mut pos_total = 0usize;
    for video in videos {
        for inst in positive_instances(disc_kind, corpus, video) {
            let s = disc.score_instance(&corpus.vocab, &inst)?;
            pos_total += 1;
            if s > 0.5 {
                pos_correct += 1;
            }
        }
    }

    let mut per_kind = BTreeMap::new();
    let mut neg_correct_all = 0usize;
    let mut neg_total_all = 0usize;
    for kind_name in kinds {
        let mut correct = 0usize;
        let mut total = 0usize;
        for (vi, video) in videos.iter().enumerate() {
            let neg_seed = derive_seed(seed, &[0x6e65, vi as u64]);
            let instances = if kind_name == GEN_SAME_VIDEO {
                let generator = generator.ok_or_else(|| DiscError::Invalid {
                    detail: "gen_same_video evaluation requires a generator".to_string(),
                })?;
                gen_same_video_instances(disc_kind, generator, video, gen_tau, neg_seed)?.0
            } else {
                let kind = kind_from_str(kind_name).ok_or_else(|| DiscError::Invalid {
                    detail: format!("unknown negative kind {kind_name:?}"),
                })?;
                let spec = NegativeSpec { kind, seed: neg_seed };
                let (samples, _) = make_negatives(&spec, video, corpus, generator, gen_tau)?;
                samples_to_instances(disc_kind, video, samples)
            };
            for inst in instances {
                let s = disc.score_instance(&corpus.vocab, &inst)?;
                total += 1;
                if s < 0.5 {
                    correct += 1;
                }
            }
        }
        neg_correct_all += correct;
        neg_total_all += total;
        per_kind.insert(
            kind_name.clone(),
            if total == 0 { f64::NAN } else { correct as f64 / total as f64 },
        );
    }
    let pooled = (pos_correct + neg_correct_all) as f64 / (pos_total + neg_total_all).max(1) as f64;
    Ok(AccuracyReport { per_kind, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic_corpus, CorpusSpec, FeatureDims};
    use crate::discriminators::{LanguageDisc, PairwiseDisc, VisualDisc, VocabShape};
    use crate::substrate::Tensor;

    #[test]
    fn objective_values_match_hand_arithmetic() {
        // Perfect discriminator: supremum 0.
        assert_eq!(disc_objective(&[1.0], &[0.0], &[0.0], 0.5, 0.5), 0.0);
        // Constant D = 0.5, one item per bucket, μ = ν = 0.5:
        // ln 0.5 + 0.5·ln 0.5 + 0.5·ln 0.5 = 2·ln 0.5 ≈ −1.3863.
        let got = disc_objective(&[0.5], &[0.5], &[0.5], 0.5, 0.5);
        assert!((got - 2.0 * 0.5f64.ln()).abs() < 1e-12, "{got}");
        assert!((got + 1.3863).abs() < 1e-4);
    }

    fn fixture() -> CorpusBundle {
        let spec = CorpusSpec {
            num_videos: 12,
            clip_range: (2, 3),
            num_events: 4,
            num_activities: 2,
            noise_sigma: 0.1,
            feature_dims: FeatureDims { motion: 8, appearance: 8, objects: 10 },
        };
        gen_synthetic_corpus(&spec, 60).unwrap()
    }

    fn tiny_arch() -> super::super::DiscArch {
        super::super::DiscArch { bow_embed: 10, mlb: 8, embed: 8, hidden: 8, attn: 6 }
    }

    fn tiny_generator(bundle: &CorpusBundle) -> GeneratorModel {
        GeneratorModel::new(
            bundle.vocab.size(),
            bundle.spec.feature_dims,
            crate::generator::GeneratorArch { hidden: 10, embed: 8, attn: 6 },
            4,
        )
        .unwrap()
    }

    #[test]
    fn visual_training_requires_generator() {
        let bundle = fixture();
        let mut disc = Discriminator::Visual(
            VisualDisc::new(VocabShape::of(&bundle.vocab), bundle.spec.feature_dims, tiny_arch(), 1)
                .unwrap(),
        );
        let cfg = DiscTrainConfig { epochs: 1, ..Default::default() };
        assert!(train_discriminator(&mut disc, &bundle, None, &cfg).is_err());
    }

    #[test]
    fn pairwise_trains_without_generator_and_counts_kinds() {
        let bundle = fixture();
        let mut disc = Discriminator::Pairwise(
            PairwiseDisc::new(VocabShape::of(&bundle.vocab), tiny_arch(), 2).unwrap(),
        );
        let cfg = DiscTrainConfig { epochs: 2, ..Default::default() };
        let out = train_discriminator(&mut disc, &bundle, None, &cfg).unwrap();
        assert_eq!(out.accuracy_curves.len(), 2);
        assert_eq!(out.negative_counts.len(), 2);
        // Mixing contract: over an epoch every applicable kind shows up.
        for counts in &out.negative_counts {
            for kind in ["order_shuffle"] {
                assert!(counts.contains_key(kind), "missing {kind}: {counts:?}");
            }
            // μ bucket kinds are drawn randomly per video; with 8 train
            // videos both appear with overwhelming probability.
            assert!(counts.contains_key("identical_pair") || counts.contains_key("truncated_pair"));
        }
        assert!(!out.audits.is_empty());
    }

    #[test]
    fn visual_hard_negatives_start_after_warmup() {
        let bundle = fixture();
        let gen = tiny_generator(&bundle);
        let mut disc = Discriminator::Visual(
            VisualDisc::new(VocabShape::of(&bundle.vocab), bundle.spec.feature_dims, tiny_arch(), 1)
                .unwrap(),
        );
        let cfg = DiscTrainConfig { epochs: 4, hard_negatives_after: 2, ..Default::default() };
        let out = train_discriminator(&mut disc, &bundle, Some(&gen), &cfg).unwrap();
        for (epoch, counts) in out.negative_counts.iter().enumerate() {
            let has_hard = counts.contains_key("hard_same_activity");
            if epoch < 2 {
                assert!(!has_hard, "epoch {epoch} used hard negatives: {counts:?}");
            }
        }
        // With 8 train videos over epochs 2..4, the 50/50 draw hits hard
        // negatives essentially surely.
        let later: usize = out.negative_counts[2..]
            .iter()
            .map(|c| c.get("hard_same_activity").copied().unwrap_or(0))
            .sum();
        assert!(later > 0);
    }

    #[test]
    fn training_moves_scores_in_the_right_direction() {
        let bundle = fixture();
        let mut disc = Discriminator::Language(
            LanguageDisc::new(VocabShape::of(&bundle.vocab), tiny_arch(), 7).unwrap(),
        );
        let gen = tiny_generator(&bundle);
        let cfg = DiscTrainConfig { epochs: 3, lr: 3e-3, ..Default::default() };
        let out = train_discriminator(&mut disc, &bundle, Some(&gen), &cfg).unwrap();
        let first = out.accuracy_curves.first().unwrap().pooled;
        let last = out.accuracy_curves.last().unwrap().pooled;
        assert!(last >= first, "accuracy fell: {first} → {last}");
        assert!(last > 0.5, "no better than chance: {last}");
    }

    #[test]
    fn objective_graph_matches_value_function() {
        // Zero-head language disc scores 0.5 everywhere: the batch loss must
        // equal −(2 ln 0.5) for one positive and one item in each bucket.
        let bundle = fixture();
        let mut lang = LanguageDisc::new(VocabShape::of(&bundle.vocab), tiny_arch(), 3).unwrap();
        *lang.store.get_mut("dl.head.w").unwrap() = Tensor::zeros(&[1, 2 * tiny_arch().hidden]);
        let disc = Discriminator::Language(lang);
        let toks = |s: &str| content_tokens(&encode_sentence(&bundle.vocab, s));
        let batch = VideoBatch {
            positives: vec![Instance::Lang { tokens: toks("a man lifts the chair") }],
            gen_bucket: vec![Instance::Lang { tokens: toks("chair the lifts man a") }],
            mismatch_bucket: vec![Instance::Lang { tokens: toks("the kids wave") }],
            audits: vec![],
            used_kinds: vec![],
        };
        let cfg = DiscTrainConfig::default();
        let mut g = Graph::new();
        let loss = batch_loss_graph(&mut g, &disc, &bundle.vocab, &batch, &cfg).unwrap();
        let expected = -disc_objective(&[0.5], &[0.5], &[0.5], 0.5, 0.5);
        assert!((g.value(loss).item() - expected).abs() < 1e-12);
    }
}
