//! Training-time competitors to discriminator-guided inference: SCST with a
//! metric reward (the greedy decode is the baseline), and the GAN loop where
//! the single discriminator's score replaces the reward, optionally mixed
//! with cross entropy.

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, CorpusBundle, Split, TokenId, VideoRecord, Vocabulary, BOS};
use crate::discriminators::train::{batch_loss_graph, build_batch};
use crate::discriminators::{
    held_out_accuracy, own_eval_kinds, single_disc_score, DiscError, DiscTrainConfig, Discriminator,
};
use crate::generator::{
    bind_generator, decode_step_graph, greedy_decode, sample_sentences, teacher_forced_ce,
    train::{encode_video_refs, video_ce_graph},
    DecoderContext, GeneratorError, GeneratorModel, Paragraph, SampledSentence,
};
use crate::metrics::{cider_d, CiderStats};
use crate::substrate::{
    adam_step, derive_seed, rng_from, AdamConfig, Graph, SubstrateError, Tensor, Var,
};

#[derive(Debug, thiserror::Error)]
pub enum RlGanError {
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Discriminator(#[from] DiscError),
    #[error("invalid configuration: {detail}")]
    Invalid { detail: String },
    #[error("unstable adversarial training halted at epoch {epoch}: held-out CE {recent:?} exceeds 2x the pre-loop CE {pre_ce:.4} for 3 consecutive epochs")]
    Unstable { epoch: usize, pre_ce: f64, recent: Vec<f64> },
}

/// Sentence-level reward for SCST-style updates.
pub trait RewardFn {
    fn reward(
        &self,
        tokens: &[TokenId],
        clip_refs: &[Vec<String>],
        vocab: &Vocabulary,
    ) -> f64;
    fn name(&self) -> &'static str;
}

/// CIDEr-D of the sentence against its clip's references, using corpus
/// document frequencies precomputed over the train split.
pub struct CiderReward<'a> {
    pub stats: &'a CiderStats,
}

impl RewardFn for CiderReward<'_> {
    fn reward(&self, tokens: &[TokenId], clip_refs: &[Vec<String>], vocab: &Vocabulary) -> f64 {
        let words: Vec<String> = tokens
            .iter()
            .filter(|t| !crate::corpus::Vocabulary::is_special(**t))
            .map(|t| vocab.token(*t).to_string())
            .collect();
        cider_d(&words, clip_refs, self.stats).unwrap_or(0.0)
    }

    fn name(&self) -> &'static str {
        "cider_d"
    }
}

/// 1 when a designated token appears in the sentence, else 0.
pub struct TokenPresenceProbe {
    pub token: TokenId,
}

impl RewardFn for TokenPresenceProbe {
    fn reward(&self, tokens: &[TokenId], _refs: &[Vec<String>], _vocab: &Vocabulary) -> f64 {
        if tokens.contains(&self.token) {
            1.0
        } else {
            0.0
        }
    }

    fn name(&self) -> &'static str {
        "token_presence_probe"
    }
}

/// Corpus-level CIDEr statistics for SCST rewards (train references).
pub fn scst_reward_stats(corpus: &CorpusBundle) -> Result<CiderStats, RlGanError> {
    let refs: Vec<Vec<Vec<String>>> = corpus
        .split_videos(Split::Train)
        .iter()
        .flat_map(|v| v.clips.iter())
        .map(|c| c.refs.iter().map(|r| tokenize(r)).collect())
        .collect();
    CiderStats::from_references(&refs)
        .map_err(|e| RlGanError::Invalid { detail: e.to_string() })
}

fn clip_refs_tokens(video: &VideoRecord, clip: usize) -> Vec<Vec<String>> {
    video.clips[clip].refs.iter().map(|r| tokenize(r)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    CiderD,
    TokenPresenceProbe { token: TokenId },
}

#[derive(Debug, Clone)]
pub struct ScstConfig {
    pub reward: RewardKind,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ScstConfig {
    fn default() -> Self {
        Self { reward: RewardKind::CiderD, lr: 5e-4, epochs: 1, seed: 0 }
    }
}

/// Outcome of one SCST-shaped update.
#[derive(Debug, Clone)]
pub struct ScstStepReport {
    pub rewards_sampled: Vec<f64>,
    pub rewards_greedy: Vec<f64>,
    /// False when every per-sentence reward difference was exactly zero: the
    /// gradient factor vanishes, so no optimizer step is applied at all.
    pub updated: bool,
    pub skipped_sentences: usize,
}

/// Sample one trajectory (τ = 1) per clip, threading sampled hidden states.
pub(crate) fn sample_trajectory(
    generator: &GeneratorModel,
    video: &VideoRecord,
    seed: u64,
) -> Result<Vec<SampledSentence>, GeneratorError> {
    let mut context = DecoderContext::start(generator.arch.hidden);
    let mut out = Vec::with_capacity(video.clips.len());
    for (i, clip) in video.clips.iter().enumerate() {
        let set =
            sample_sentences(generator, &clip.features, &context, 1, 1.0, derive_seed(seed, &[i as u64]))?;
        let sentence = set.candidates.into_iter().next().expect("k = 1");
        context = DecoderContext(sentence.final_hidden.clone());
        out.push(sentence);
    }
    Ok(out)
}

/// Teacher-force the given trajectory and return per-sentence summed
/// log-probability vars (context threads through the graph, so gradients
/// flow across sentence boundaries).
pub(crate) fn trajectory_logprob_vars(
    g: &mut Graph,
    generator: &GeneratorModel,
    video: &VideoRecord,
    trajectory: &[SampledSentence],
) -> Result<Vec<Option<(Var, usize)>>, RlGanError> {
    let vars = bind_generator(g, generator)?;
    let hidden = generator.arch.hidden;
    let mut context = g.constant(Tensor::zeros(&[hidden]))?;
    let mut out = Vec::with_capacity(trajectory.len());
    for (clip, sentence) in video.clips.iter().zip(trajectory) {
        if sentence.tokens.is_empty() {
            out.push(None);
            continue;
        }
        let mut h = g.constant(Tensor::zeros(&[hidden]))?;
        let mut c = g.constant(Tensor::zeros(&[hidden]))?;
        let mut prev = BOS;
        let mut sum: Option<Var> = None;
        for &token in &sentence.tokens {
            let (logits, h2, c2) =
                decode_step_graph(g, &vars, &clip.features, prev, h, c, context)?;
            h = h2;
            c = c2;
            let logp = g.log_softmax(logits)?;
            let picked = g.pick(logp, token as usize)?;
            sum = Some(match sum {
                Some(s) => g.add(s, picked)?,
                None => picked,
            });
            prev = token;
        }
        context = h;
        out.push(sum.map(|s| (s, sentence.tokens.len())));
    }
    Ok(out)
}

/// One SCST update on one video: sample a trajectory at τ = 1, recompute the
/// greedy baseline, and scale each sentence's log-probability gradient by
/// its reward difference. When every difference is exactly zero the step is
/// skipped entirely (the factor annihilates the gradient).
pub fn scst_update(
    generator: &mut GeneratorModel,
    video: &VideoRecord,
    vocab: &Vocabulary,
    reward: &dyn RewardFn,
    lr: f64,
    seed: u64,
) -> Result<ScstStepReport, RlGanError> {
    let sampled = sample_trajectory(generator, video, derive_seed(seed, &[0x73]))?;
    let greedy: Paragraph = greedy_decode(generator, video)?;

    let mut rewards_sampled = Vec::with_capacity(video.clips.len());
    let mut rewards_greedy = Vec::with_capacity(video.clips.len());
    let mut skipped = 0usize;
    for (i, (s, g_sent)) in sampled.iter().zip(&greedy.sentences).enumerate() {
        let refs = clip_refs_tokens(video, i);
        if s.content_len() == 0 {
            // Malformed (empty) sample: reward undefined, sentence skipped.
            skipped += 1;
            rewards_sampled.push(0.0);
            rewards_greedy.push(0.0);
            continue;
        }
        rewards_sampled.push(reward.reward(&s.tokens, &refs, vocab));
        rewards_greedy.push(reward.reward(&g_sent.tokens, &refs, vocab));
    }
    let diffs: Vec<f64> =
        rewards_sampled.iter().zip(&rewards_greedy).map(|(a, b)| a - b).collect();
    if diffs.iter().all(|d| *d == 0.0) {
        return Ok(ScstStepReport { rewards_sampled, rewards_greedy, updated: false, skipped_sentences: skipped });
    }

    let mut g = Graph::new();
    let logps = trajectory_logprob_vars(&mut g, generator, video, &sampled)?;
    let mut loss: Option<Var> = None;
    for (lp, diff) in logps.into_iter().zip(&diffs) {
        let Some((lp, _len)) = lp else { continue };
        let term = g.scale(lp, -diff)?;
        loss = Some(match loss {
            Some(l) => g.add(l, term)?,
            None => term,
        });
    }
    let Some(loss) = loss else {
        return Ok(ScstStepReport { rewards_sampled, rewards_greedy, updated: false, skipped_sentences: skipped });
    };
    let grads = g.backward(loss)?;
    adam_step(&mut generator.store, &grads, &AdamConfig::new(lr))?;
    Ok(ScstStepReport { rewards_sampled, rewards_greedy, updated: true, skipped_sentences: skipped })
}

#[derive(Debug, Clone)]
pub struct ScstTrainOutput {
    /// Mean sampled reward per epoch.
    pub reward_curve: Vec<f64>,
    pub updates: usize,
}

/// SCST over the train split for `cfg.epochs` passes.
pub fn train_scst(
    generator: &mut GeneratorModel,
    corpus: &CorpusBundle,
    cfg: &ScstConfig,
) -> Result<ScstTrainOutput, RlGanError> {
    let stats;
    let cider;
    let probe;
    let reward: &dyn RewardFn = match cfg.reward {
        RewardKind::CiderD => {
            stats = scst_reward_stats(corpus)?;
            cider = CiderReward { stats: &stats };
            &cider
        }
        RewardKind::TokenPresenceProbe { token } => {
            probe = TokenPresenceProbe { token };
            &probe
        }
    };
    let videos = corpus.split_videos(Split::Train);
    if videos.is_empty() {
        return Err(RlGanError::Invalid { detail: "empty train split".to_string() });
    }
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut updates = 0usize;
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (vi, video) in videos.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &[0x736373, epoch as u64, vi as u64]);
            let report = scst_update(generator, video, &corpus.vocab, reward, cfg.lr, seed)?;
            if report.updated {
                updates += 1;
            }
            sum += report.rewards_sampled.iter().sum::<f64>();
            count += report.rewards_sampled.len();
        }
        curve.push(sum / count.max(1) as f64);
    }
    Ok(ScstTrainOutput { reward_curve: curve, updates })
}

/// `L_MIX = λ·L_GAN + (1−λ)·L_CE`.
pub fn mixed_loss(l_gan: f64, l_ce: f64, lambda_mix: f64) -> f64 {
    lambda_mix * l_gan + (1.0 - lambda_mix) * l_ce
}

#[derive(Debug, Clone)]
pub struct GanConfig {
    pub lambda_mix: f64,
    pub generator_steps_per_disc_step: usize,
    pub mu: f64,
    pub nu: f64,
    pub lr: f64,
    pub epochs: usize,
    pub use_ce: bool,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            lambda_mix: 0.995,
            generator_steps_per_disc_step: 5,
            mu: 0.5,
            nu: 0.5,
            lr: 5e-4,
            epochs: 2,
            use_ce: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Default)]
pub struct GanTrainOutput {
    pub step_log: Vec<StepKind>,
    pub gen_ce_curve: Vec<f64>,
    pub disc_accuracy_curve: Vec<f64>,
    pub pre_ce: f64,
}

/// One generator update from the GAN objective: the SCST-shaped term with
/// discriminator score differences, mixed with teacher-forced CE when
/// `use_ce`. Both terms are per-token means so the λ mix is scale-balanced.
pub fn gan_generator_update(
    generator: &mut GeneratorModel,
    disc: &Discriminator,
    video: &VideoRecord,
    corpus: &CorpusBundle,
    cfg: &GanConfig,
    seed: u64,
) -> Result<bool, RlGanError> {
    let Discriminator::Single(single) = disc else {
        return Err(RlGanError::Invalid {
            detail: "the adversarial loop trains against the single discriminator".to_string(),
        });
    };
    let sampled = sample_trajectory(generator, video, derive_seed(seed, &[0x67]))?;
    let greedy = greedy_decode(generator, video)?;
    let mut diffs = Vec::with_capacity(video.clips.len());
    for (i, (s, g_sent)) in sampled.iter().zip(&greedy.sentences).enumerate() {
        if s.content_len() == 0 {
            diffs.push(0.0);
            continue;
        }
        let d_s = single_disc_score(single, &s.tokens, &video.clips[i].features)?;
        let d_g = if g_sent.content_len() == 0 {
            0.0
        } else {
            single_disc_score(single, &g_sent.tokens, &video.clips[i].features)?
        };
        diffs.push(d_s - d_g);
    }

    let gan_active = diffs.iter().any(|d| *d != 0.0);
    if !gan_active && !cfg.use_ce {
        return Ok(false);
    }

    let mut g = Graph::new();
    let mut loss: Option<Var> = None;
    if gan_active {
        let logps = trajectory_logprob_vars(&mut g, generator, video, &sampled)?;
        let mut gan_term: Option<Var> = None;
        let mut tokens = 0usize;
        for (lp, diff) in logps.into_iter().zip(&diffs) {
            let Some((lp, len)) = lp else { continue };
            tokens += len;
            let term = g.scale(lp, -diff)?;
            gan_term = Some(match gan_term {
                Some(t) => g.add(t, term)?,
                None => term,
            });
        }
        if let Some(t) = gan_term {
            let mean = g.scale(t, 1.0 / tokens.max(1) as f64)?;
            let weighted =
                g.scale(mean, if cfg.use_ce { cfg.lambda_mix } else { 1.0 })?;
            loss = Some(weighted);
        }
    }
    if cfg.use_ce {
        let vars = bind_generator(&mut g, generator)?;
        let encoded = encode_video_refs(&corpus.vocab, video);
        let (ce_sum, count) = video_ce_graph(&mut g, &vars, generator, video, &encoded)?;
        let ce_mean = g.scale(ce_sum, 1.0 / count.max(1) as f64)?;
        let weighted = g.scale(ce_mean, 1.0 - cfg.lambda_mix)?;
        loss = Some(match loss {
            Some(l) => g.add(l, weighted)?,
            None => weighted,
        });
    }
    let Some(loss) = loss else { return Ok(false) };
    let grads = g.backward(loss)?;
    adam_step(&mut generator.store, &grads, &AdamConfig::new(cfg.lr))?;
    Ok(true)
}

/// Alternating adversarial loop: `generator_steps_per_disc_step` generator
/// updates per discriminator update, cycling the train split. Halts with
/// diagnostics when held-out CE exceeds twice the pre-loop CE for three
/// consecutive epochs.
pub fn gan_train_loop(
    generator: &mut GeneratorModel,
    disc: &mut Discriminator,
    corpus: &CorpusBundle,
    cfg: &GanConfig,
) -> Result<GanTrainOutput, RlGanError> {
    if !matches!(disc, Discriminator::Single(_)) {
        return Err(RlGanError::Invalid {
            detail: "the adversarial loop trains against the single discriminator".to_string(),
        });
    }
    let videos = corpus.split_videos(Split::Train);
    if videos.is_empty() {
        return Err(RlGanError::Invalid { detail: "empty train split".to_string() });
    }
    let val = corpus.split_videos(Split::Val);
    let pre_ce = teacher_forced_ce(generator, &corpus.vocab, &val)?;
    let disc_cfg = DiscTrainConfig {
        mu: cfg.mu,
        nu: cfg.nu,
        lr: cfg.lr,
        gen_tau: 1.0,
        epochs: 1,
        hard_negatives_after: usize::MAX,
        seed: cfg.seed,
    };
    let mut out = GanTrainOutput { pre_ce, ..Default::default() };
    let mut bad_epochs = 0usize;
    let cycle = cfg.generator_steps_per_disc_step + 1;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..videos.len()).collect();
        let mut rng = rng_from(derive_seed(cfg.seed, &[0x67616e, epoch as u64]));
        {
            use rand::Rng;
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
        }
        for (step, &vi) in order.iter().enumerate() {
            let video = videos[vi];
            let seed = derive_seed(cfg.seed, &[0x75, epoch as u64, step as u64]);
            // Global cycle position: the log itself is the schedule, so a
            // skipped video leaves the slot pending for the next one and the
            // 5:1 pattern holds exactly over any window.
            if (out.step_log.len() + 1) % cycle == 0 {
                // Discriminator turn: a fresh batch and graph, never shared
                // with a generator step.
                let mut krng = rng_from(derive_seed(seed, &[1]));
                let batch = build_batch(
                    disc.kind(),
                    corpus,
                    video,
                    Some(generator),
                    &disc_cfg,
                    false,
                    &mut krng,
                    derive_seed(seed, &[2]),
                )?;
                if batch.positives.is_empty()
                    || (batch.gen_bucket.is_empty() && batch.mismatch_bucket.is_empty())
                {
                    continue;
                }
                let mut graph = Graph::new();
                let loss = batch_loss_graph(&mut graph, disc, &corpus.vocab, &batch, &disc_cfg)?;
                let grads = graph.backward(loss)?;
                adam_step(disc.store_mut(), &grads, &AdamConfig::new(cfg.lr))?;
                out.step_log.push(StepKind::Discriminator);
            } else if gan_generator_update(generator, disc, video, corpus, cfg, seed)? {
                out.step_log.push(StepKind::Generator);
            }
        }
        let ce = teacher_forced_ce(generator, &corpus.vocab, &val)?;
        out.gen_ce_curve.push(ce);
        let acc = held_out_accuracy(
            disc,
            corpus,
            &val,
            Some(generator),
            &own_eval_kinds(disc.kind(), false),
            1.0,
            derive_seed(cfg.seed, &[0x6163, epoch as u64]),
        )?;
        out.disc_accuracy_curve.push(acc.pooled);
        if ce > 2.0 * pre_ce {
            bad_epochs += 1;
            if bad_epochs >= 3 {
                return Err(RlGanError::Unstable {
                    epoch,
                    pre_ce,
                    recent: out.gen_ce_curve[out.gen_ce_curve.len() - 3..].to_vec(),
                });
            }
        } else {
            bad_epochs = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic_corpus, CorpusSpec, FeatureDims};
    use crate::generator::GeneratorArch;
    use crate::substrate::graph::softmax_slice;

    fn fixture() -> (CorpusBundle, GeneratorModel) {
        let spec = CorpusSpec {
            num_videos: 8,
            clip_range: (1, 2),
            num_events: 4,
            num_activities: 2,
            noise_sigma: 0.1,
            feature_dims: FeatureDims { motion: 8, appearance: 8, objects: 10 },
        };
        let bundle = gen_synthetic_corpus(&spec, 90).unwrap();
        let gen = GeneratorModel::new(
            bundle.vocab.size(),
            spec.feature_dims,
            GeneratorArch { hidden: 10, embed: 8, attn: 6 },
            7,
        )
        .unwrap();
        (bundle, gen)
    }

    struct FixedReward {
        sample: f64,
        greedy: f64,
        calls: std::cell::Cell<usize>,
    }

    impl RewardFn for FixedReward {
        fn reward(&self, _t: &[TokenId], _r: &[Vec<String>], _v: &Vocabulary) -> f64 {
            // Alternating calls: sampled first, then greedy, per sentence.
            let n = self.calls.get();
            self.calls.set(n + 1);
            if n % 2 == 0 {
                self.sample
            } else {
                self.greedy
            }
        }

        fn name(&self) -> &'static str {
            "fixed"
        }
    }

    #[test]
    fn equal_rewards_apply_no_update_at_all() {
        let (bundle, mut gen) = fixture();
        let video = bundle.split_videos(Split::Train)[0];
        let before = gen.store.clone();
        let reward =
            FixedReward { sample: 0.7, greedy: 0.7, calls: std::cell::Cell::new(0) };
        let report =
            scst_update(&mut gen, video, &bundle.vocab, &reward, 5e-4, 11).unwrap();
        assert!(!report.updated);
        for name in before.names() {
            assert_eq!(
                gen.store.get(name).unwrap().data(),
                before.get(name).unwrap().data(),
                "parameter {name} moved"
            );
        }
        assert_eq!(gen.store.version(), before.version());
    }

    #[test]
    fn unit_reward_difference_equals_plain_logprob_gradient_step() {
        let (bundle, mut gen) = fixture();
        let video = bundle.split_videos(Split::Train)[0];
        let mut reference = gen.clone();
        let seed = 21;

        let reward = FixedReward { sample: 1.0, greedy: 0.0, calls: std::cell::Cell::new(0) };
        let report = scst_update(&mut gen, video, &bundle.vocab, &reward, 5e-4, seed).unwrap();
        assert!(report.updated);

        // Reproduce the same sampled trajectory and apply ∇(−Σ log p) by hand.
        let sampled = sample_trajectory(&reference, video, derive_seed(seed, &[0x73])).unwrap();
        let mut g = Graph::new();
        let logps = trajectory_logprob_vars(&mut g, &reference, video, &sampled).unwrap();
        let mut loss: Option<Var> = None;
        for lp in logps.into_iter().flatten() {
            let term = g.scale(lp.0, -1.0).unwrap();
            loss = Some(match loss {
                Some(l) => g.add(l, term).unwrap(),
                None => term,
            });
        }
        let grads = g.backward(loss.unwrap()).unwrap();
        adam_step(&mut reference.store, &grads, &AdamConfig::new(5e-4)).unwrap();
        for name in reference.store.names() {
            assert_eq!(
                gen.store.get(name).unwrap().data(),
                reference.store.get(name).unwrap().data(),
                "parameter {name} differs"
            );
        }
    }

    #[test]
    fn reinforce_with_greedy_baseline_matches_expected_score_gradient() {
        // Two-outcome toy: p = softmax(θ), J(θ) = Σ_x p(x)·D(x). The exact
        // REINFORCE-with-baseline expectation Σ_x p(x)(D(x) − D(argmax))∇log p(x)
        // must match central differences of J.
        let theta = [0.3, -0.4];
        let d = [0.9, 0.2];
        let p = softmax_slice(&theta);
        let greedy = if p[0] >= p[1] { 0 } else { 1 };

        let grad_estimate: Vec<f64> = {
            let mut acc = vec![0.0; 2];
            for x in 0..2 {
                // ∇ log p(x) for softmax: e_x − p.
                for (i, a) in acc.iter_mut().enumerate() {
                    let indicator = if i == x { 1.0 } else { 0.0 };
                    *a += p[x] * (d[x] - d[greedy]) * (indicator - p[i]);
                }
            }
            acc
        };

        let j = |t: &[f64]| -> f64 {
            let p = softmax_slice(t);
            p[0] * d[0] + p[1] * d[1]
        };
        let h = 1e-6;
        for i in 0..2 {
            let mut tp = theta;
            tp[i] += h;
            let mut tm = theta;
            tm[i] -= h;
            let fd = (j(&tp) - j(&tm)) / (2.0 * h);
            assert!(
                (fd - grad_estimate[i]).abs() < 1e-8,
                "coordinate {i}: fd {fd} vs estimate {}",
                grad_estimate[i]
            );
        }
    }

    #[test]
    fn mixed_loss_values() {
        assert!((mixed_loss(2.0, 4.0, 0.995) - 2.01).abs() < 1e-12);
        assert_eq!(mixed_loss(3.5, 9.0, 0.0), 9.0);
        assert_eq!(mixed_loss(3.5, 9.0, 1.0), 3.5);
        // Linearity in both arguments.
        let (a, b) = (1.3, -0.4);
        let lhs = mixed_loss(a + b, 0.0, 0.7);
        let rhs = mixed_loss(a, 0.0, 0.7) + mixed_loss(b, 0.0, 0.7);
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((mixed_loss(2.0 * a, 2.0 * b, 0.7) - 2.0 * mixed_loss(a, b, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn gan_loop_keeps_exact_schedule() {
        let (bundle, mut gen) = fixture();
        let arch = crate::discriminators::DiscArch {
            bow_embed: 10,
            mlb: 8,
            embed: 8,
            hidden: 8,
            attn: 6,
        };
        let mut disc = Discriminator::Single(
            crate::discriminators::SingleDisc::new(
                crate::discriminators::VocabShape::of(&bundle.vocab),
                bundle.spec.feature_dims,
                arch,
                2,
            )
            .unwrap(),
        );
        let cfg = GanConfig { epochs: 2, ..Default::default() };
        let out = gan_train_loop(&mut gen, &mut disc, &bundle, &cfg).unwrap();
        // Every window of the step log respects the 5:1 pattern: a
        // discriminator step appears exactly at each 6th slot.
        assert!(out.step_log.len() >= 6, "loop too short to check the schedule");
        for (i, kind) in out.step_log.iter().enumerate() {
            let pos = i % 6;
            let expected =
                if pos == 5 { StepKind::Discriminator } else { StepKind::Generator };
            assert_eq!(*kind, expected, "step {i}");
        }
        assert_eq!(out.gen_ce_curve.len(), 2);
        assert_eq!(out.disc_accuracy_curve.len(), 2);
    }

    #[test]
    fn gan_loop_curves_are_seed_reproducible() {
        let (bundle, gen0) = fixture();
        let arch = crate::discriminators::DiscArch {
            bow_embed: 10,
            mlb: 8,
            embed: 8,
            hidden: 8,
            attn: 6,
        };
        let mk_disc = || {
            Discriminator::Single(
                crate::discriminators::SingleDisc::new(
                    crate::discriminators::VocabShape::of(&bundle.vocab),
                    bundle.spec.feature_dims,
                    arch,
                    2,
                )
                .unwrap(),
            )
        };
        let cfg = GanConfig { epochs: 1, ..Default::default() };
        let mut gen_a = gen0.clone();
        let mut disc_a = mk_disc();
        let a = gan_train_loop(&mut gen_a, &mut disc_a, &bundle, &cfg).unwrap();
        let mut gen_b = gen0.clone();
        let mut disc_b = mk_disc();
        let b = gan_train_loop(&mut gen_b, &mut disc_b, &bundle, &cfg).unwrap();
        assert_eq!(a.gen_ce_curve, b.gen_ce_curve);
        assert_eq!(a.disc_accuracy_curve, b.disc_accuracy_curve);
    }
}
