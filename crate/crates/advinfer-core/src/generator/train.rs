//! Maximum-likelihood training with teacher forcing.
//!
//! A batch is one video: all of its clip/caption pairs (at most 8 clips × 2
//! reference tracks = 16). Within a track the previous sentence's final
//! hidden state is threaded as context, so gradients flow through the whole
//! paragraph.

use rand::Rng;

use crate::corpus::{encode_sentence, CorpusBundle, Split, TokenId, VideoRecord, Vocabulary};
use crate::substrate::{adam_step, derive_seed, rng_from, AdamConfig, Graph, Var};

use super::{bind_generator, decode_step_graph, GenVars, GeneratorError, GeneratorModel};

#[derive(Debug, Clone)]
pub struct MleConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self { lr: 5e-4, epochs: 10, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Mean per-token cross entropy per epoch.
    pub loss_curve: Vec<f64>,
}

pub(crate) fn encode_video_refs(
    vocab: &Vocabulary,
    video: &VideoRecord,
) -> Vec<[Vec<TokenId>; 2]> {
    video
        .clips
        .iter()
        .map(|c| [encode_sentence(vocab, &c.refs[0]), encode_sentence(vocab, &c.refs[1])])
        .collect()
}

/// Teacher-forced cross-entropy graph for one video; returns the summed loss
/// var and the number of target tokens.
pub(crate) fn video_ce_graph(
    g: &mut Graph,
    vars: &GenVars,
    model: &GeneratorModel,
    video: &VideoRecord,
    encoded: &[[Vec<TokenId>; 2]],
) -> Result<(Var, usize), GeneratorError> {
    let hidden = model.arch.hidden;
    let mut total: Option<Var> = None;
    let mut count = 0usize;
    for track in 0..2 {
        let mut context = g.constant(crate::substrate::Tensor::zeros(&[hidden]))?;
        for (clip, ids2) in video.clips.iter().zip(encoded) {
            let ids = &ids2[track];
            let mut h = g.constant(crate::substrate::Tensor::zeros(&[hidden]))?;
            let mut c = g.constant(crate::substrate::Tensor::zeros(&[hidden]))?;
            for m in 1..ids.len() {
                let (logits, h2, c2) =
                    decode_step_graph(g, vars, &clip.features, ids[m - 1], h, c, context)?;
                h = h2;
                c = c2;
                let logp = g.log_softmax(logits)?;
                let picked = g.pick(logp, ids[m] as usize)?;
                let nll = g.scale(picked, -1.0)?;
                total = Some(match total {
                    Some(t) => g.add(t, nll)?,
                    None => nll,
                });
                count += 1;
            }
            context = h;
        }
    }
    let total = total.ok_or_else(|| GeneratorError::Invalid {
        detail: format!("video {} has no trainable tokens", video.video_id),
    })?;
    Ok((total, count))
}

/// Mean per-token teacher-forced cross entropy over `videos` (no updates).
pub fn teacher_forced_ce(
    model: &GeneratorModel,
    vocab: &Vocabulary,
    videos: &[&VideoRecord],
) -> Result<f64, GeneratorError> {
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for video in videos {
        let encoded = encode_video_refs(vocab, video);
        let mut g = Graph::new();
        let vars = bind_generator(&mut g, model)?;
        let (loss, count) = video_ce_graph(&mut g, &vars, model, video, &encoded)?;
        sum += g.value(loss).item();
        tokens += count;
    }
    Ok(sum / tokens.max(1) as f64)
}

/// MLE training over the train split. On divergence (non-finite loss or
/// gradient) the parameters are rolled back to the last finished epoch and a
/// [`GeneratorError::Diverged`] is returned.
pub fn train_mle(
    model: &mut GeneratorModel,
    corpus: &CorpusBundle,
    cfg: &MleConfig,
) -> Result<TrainOutput, GeneratorError> {
    let videos = corpus.split_videos(Split::Train);
    if videos.is_empty() {
        return Err(GeneratorError::Invalid { detail: "empty train split".to_string() });
    }
    let encoded: Vec<_> = videos.iter().map(|v| encode_video_refs(&corpus.vocab, v)).collect();
    let adam = AdamConfig::new(cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let snapshot = model.store.clone();
        let mut order: Vec<usize> = (0..videos.len()).collect();
        let mut rng = rng_from(derive_seed(cfg.seed, &[0x6d6c65, epoch as u64]));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_sum = 0.0;
        let mut epoch_tokens = 0usize;
        for &vi in &order {
            let step = (|| -> Result<(f64, usize), GeneratorError> {
                let mut g = Graph::new();
                let vars = bind_generator(&mut g, model)?;
                let (total, count) = video_ce_graph(&mut g, &vars, model, videos[vi], &encoded[vi])?;
                let mean = g.scale(total, 1.0 / count as f64)?;
                let loss_value = g.value(mean).item();
                let grads = g.backward(mean)?;
                adam_step(&mut model.store, &grads, &adam)?;
                Ok((loss_value * count as f64, count))
            })();
            match step {
                Ok((sum, count)) => {
                    epoch_sum += sum;
                    epoch_tokens += count;
                }
                Err(err) => {
                    model.store = snapshot;
                    return Err(GeneratorError::Diverged { epoch, detail: err.to_string() });
                }
            }
        }
        curve.push(epoch_sum / epoch_tokens.max(1) as f64);
    }
    Ok(TrainOutput { loss_curve: curve })
}
