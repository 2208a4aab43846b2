//! The multi-sentence generator: a per-clip attention-conditioned recurrent
//! decoder that threads the previous sentence's final hidden state as
//! context, plus all decoding strategies (greedy, beam, temperature
//! sampling, log-probability reranking).

pub mod train;

pub use train::{teacher_forced_ce, train_mle, MleConfig, TrainOutput};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    detokenize, ClipFeatures, FeatureDims, TokenId, VideoRecord, Vocabulary, BOS, EOS,
    MAX_SENTENCE_TOKENS, PAD,
};
use crate::substrate::{
    categorical, derive_seed, lstm_step, rng_from, softmax_with_temperature, temporal_attention,
    AttentionSpec, Graph, LstmSpec, LstmState, ParamStore, SubstrateError, Tensor, Var,
};

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error("training diverged at epoch {epoch}: {detail}; parameters rolled back to last finished epoch")]
    Diverged { epoch: usize, detail: String },
    #[error("invalid generator input: {detail}")]
    Invalid { detail: String },
}

/// Model sizes; the decoder cell state is 512-dim by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorArch {
    pub hidden: usize,
    pub embed: usize,
    pub attn: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        Self { hidden: 512, embed: 300, attn: 64 }
    }
}

pub const MODALITIES: [&str; 3] = ["motion", "appearance", "objects"];

/// Word embedding, decoder cell, one temporal-attention scorer per modality
/// and the output projection, all living in one parameter store.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub vocab_size: usize,
    pub dims: FeatureDims,
    pub arch: GeneratorArch,
    pub store: ParamStore,
}

impl GeneratorModel {
    pub fn new(
        vocab_size: usize,
        dims: FeatureDims,
        arch: GeneratorArch,
        seed: u64,
    ) -> Result<Self, GeneratorError> {
        let mut store = ParamStore::new();
        let mut rng = rng_from(derive_seed(seed, &[0x67656e]));
        let embed_bound = 0.1;
        store.insert(
            "gen.embed",
            crate::substrate::nn::init_matrix(&mut rng, vocab_size, arch.embed, embed_bound),
        )?;
        let cell = Self::cell_spec_for(dims, arch);
        cell.init(&mut store, &mut rng)?;
        for spec in Self::attention_specs_for(dims, arch) {
            spec.init(&mut store, &mut rng)?;
        }
        let proj_bound = 1.0 / (arch.hidden as f64).sqrt();
        store.insert(
            "gen.proj.w",
            crate::substrate::nn::init_matrix(&mut rng, vocab_size, arch.hidden, proj_bound),
        )?;
        store.insert("gen.proj.b", Tensor::zeros(&[vocab_size]))?;
        Ok(Self { vocab_size, dims, arch, store })
    }

    fn cell_spec_for(dims: FeatureDims, arch: GeneratorArch) -> LstmSpec {
        let visual = dims.motion + dims.appearance + dims.objects;
        // Cell input: attended visual concat, previous word embedding, and
        // the previous sentence's final hidden state at every step.
        LstmSpec::new("gen.cell", visual + arch.embed + arch.hidden, arch.hidden)
    }

    fn attention_specs_for(dims: FeatureDims, arch: GeneratorArch) -> [AttentionSpec; 3] {
        let seg = |m: &str| match m {
            "motion" => dims.motion,
            "appearance" => dims.appearance,
            _ => dims.objects,
        };
        MODALITIES.map(|m| AttentionSpec::new(format!("gen.att.{m}"), arch.hidden, seg(m), arch.attn))
    }

    pub fn cell_spec(&self) -> LstmSpec {
        Self::cell_spec_for(self.dims, self.arch)
    }

    pub fn attention_specs(&self) -> [AttentionSpec; 3] {
        Self::attention_specs_for(self.dims, self.arch)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.store.names().cloned().collect()
    }

    pub fn checkpoint_meta(&self, vocab_hash: &str) -> std::collections::BTreeMap<String, String> {
        let mut meta = std::collections::BTreeMap::new();
        meta.insert("kind".to_string(), "generator".to_string());
        meta.insert("vocab_hash".to_string(), vocab_hash.to_string());
        meta.insert("vocab_size".to_string(), self.vocab_size.to_string());
        meta.insert("hidden".to_string(), self.arch.hidden.to_string());
        meta.insert("embed".to_string(), self.arch.embed.to_string());
        meta.insert("attn".to_string(), self.arch.attn.to_string());
        meta.insert("dim_motion".to_string(), self.dims.motion.to_string());
        meta.insert("dim_appearance".to_string(), self.dims.appearance.to_string());
        meta.insert("dim_objects".to_string(), self.dims.objects.to_string());
        meta
    }

    pub fn from_checkpoint(
        store: ParamStore,
        meta: &std::collections::BTreeMap<String, String>,
    ) -> Result<Self, GeneratorError> {
        let get = |key: &str| -> Result<usize, GeneratorError> {
            meta.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| GeneratorError::Invalid { detail: format!("meta missing {key}") })
        };
        Ok(Self {
            vocab_size: get("vocab_size")?,
            dims: FeatureDims {
                motion: get("dim_motion")?,
                appearance: get("dim_appearance")?,
                objects: get("dim_objects")?,
            },
            arch: GeneratorArch { hidden: get("hidden")?, embed: get("embed")?, attn: get("attn")? },
            store,
        })
    }
}

/// Previous-sentence context: the final hidden state of the sentence before
/// this one, exactly zero for the first sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderContext(pub Tensor);

impl DecoderContext {
    pub fn start(hidden: usize) -> Self {
        Self(Tensor::zeros(&[hidden]))
    }
}

/// Bound parameter vars for one graph.
pub(crate) struct GenVars {
    pub embed: Var,
    pub cell: crate::substrate::LstmVars,
    pub attention: [crate::substrate::AttentionVars; 3],
    pub proj_w: Var,
    pub proj_b: Var,
}

pub(crate) fn bind_generator(
    g: &mut Graph,
    model: &GeneratorModel,
) -> Result<GenVars, SubstrateError> {
    let cell = model.cell_spec().bind(g, &model.store)?;
    let specs = model.attention_specs();
    let attention = [
        specs[0].bind(g, &model.store)?,
        specs[1].bind(g, &model.store)?,
        specs[2].bind(g, &model.store)?,
    ];
    Ok(GenVars {
        embed: g.param(&model.store, "gen.embed")?,
        cell,
        attention,
        proj_w: g.param(&model.store, "gen.proj.w")?,
        proj_b: g.param(&model.store, "gen.proj.b")?,
    })
}

/// One decoder step inside an existing graph: attend each modality with the
/// previous hidden state, concatenate with the previous word embedding and
/// the sentence context, advance the cell, project to vocabulary logits.
pub(crate) fn decode_step_graph(
    g: &mut Graph,
    vars: &GenVars,
    clip: &ClipFeatures,
    prev_word: TokenId,
    h: Var,
    c: Var,
    context: Var,
) -> Result<(Var, Var, Var), SubstrateError> {
    let segments = [
        g.constant_shared(clip.motion.clone())?,
        g.constant_shared(clip.appearance.clone())?,
        g.constant_shared(clip.objects.clone())?,
    ];
    let mut attended = Vec::with_capacity(3);
    for (vars_f, segs) in vars.attention.iter().zip(segments) {
        let (att, _) = temporal_attention(g, vars_f, h, segs)?;
        attended.push(att);
    }
    let word = g.row(vars.embed, prev_word as usize)?;
    let x = g.concat(&[attended[0], attended[1], attended[2], word, context])?;
    let (h_next, c_next) = lstm_step(g, &vars.cell, x, h, c)?;
    let logits = g.affine(vars.proj_w, h_next, vars.proj_b)?;
    Ok((logits, h_next, c_next))
}

/// Eval-mode step: next-word distribution plus the advanced state.
pub fn decode_step(
    model: &GeneratorModel,
    clip: &ClipFeatures,
    prev_word: TokenId,
    state: &LstmState,
    context: &DecoderContext,
) -> Result<(Vec<f64>, LstmState), GeneratorError> {
    let mut g = Graph::new();
    let vars = bind_generator(&mut g, model)?;
    let h = g.constant(state.h.clone())?;
    let c = g.constant(state.c.clone())?;
    let ctx = g.constant(context.0.clone())?;
    let (logits, h2, c2) = decode_step_graph(&mut g, &vars, clip, prev_word, h, c, ctx)?;
    let dist = g.softmax(logits)?;
    Ok((
        g.value(dist).data().to_vec(),
        LstmState { h: g.value(h2).clone(), c: g.value(c2).clone() },
    ))
}

/// A single generated sentence: tokens (terminating EOS included when it was
/// emitted), per-token log-probabilities under the raw model distribution,
/// their sum, and the decoder's final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSentence {
    pub tokens: Vec<TokenId>,
    pub token_logprobs: Vec<f64>,
    pub logprob: f64,
    pub final_hidden: Tensor,
}

impl SampledSentence {
    pub fn content_len(&self) -> usize {
        self.tokens.iter().filter(|t| **t != EOS).count()
    }

    /// Length-normalized log-probability (token count includes EOS).
    pub fn normalized_logprob(&self) -> f64 {
        self.logprob / self.tokens.len().max(1) as f64
    }

    pub fn surface(&self, vocab: &Vocabulary) -> String {
        detokenize(vocab, &self.tokens)
    }
}

/// K candidates for one clip.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<SampledSentence>,
}

/// One sentence per clip.
#[derive(Debug, Clone)]
pub struct Paragraph {
    pub video_id: String,
    pub sentences: Vec<SampledSentence>,
}

impl Paragraph {
    pub fn surfaces(&self, vocab: &Vocabulary) -> Vec<String> {
        self.sentences.iter().map(|s| s.surface(vocab)).collect()
    }
}

/// BOS and PAD are structurally forbidden as outputs: their mass is removed
/// and the distribution renormalized.
fn mask_specials(dist: &mut [f64]) {
    let removed = dist[PAD as usize] + dist[BOS as usize];
    dist[PAD as usize] = 0.0;
    dist[BOS as usize] = 0.0;
    if removed > 0.0 {
        let z = 1.0 - removed;
        if z > 0.0 {
            for v in dist.iter_mut() {
                *v /= z;
            }
        }
    }
}

fn argmax_lowest_index(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate().skip(1) {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// Roll one sentence with an arbitrary token-choice policy. The policy sees
/// the masked renormalized distribution; recorded log-probs are the raw
/// model log-probabilities of the chosen tokens.
fn roll_sentence<F>(
    model: &GeneratorModel,
    clip: &ClipFeatures,
    context: &DecoderContext,
    mut choose: F,
) -> Result<SampledSentence, GeneratorError>
where
    F: FnMut(&[f64], usize) -> Result<TokenId, GeneratorError>,
{
    let mut state = LstmState::zeros(model.arch.hidden);
    let mut prev = BOS;
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    for step in 0..=MAX_SENTENCE_TOKENS {
        let (raw, next_state) = decode_step(model, clip, prev, &state, context)?;
        state = next_state;
        let mut dist = raw.clone();
        mask_specials(&mut dist);
        // At the cap only EOS remains a legal choice.
        let token =
            if step == MAX_SENTENCE_TOKENS { EOS } else { choose(&dist, step)? };
        tokens.push(token);
        logprobs.push(raw[token as usize].max(f64::MIN_POSITIVE).ln());
        if token == EOS {
            break;
        }
        prev = token;
    }
    let logprob = logprobs.iter().sum();
    Ok(SampledSentence { tokens, token_logprobs: logprobs, logprob, final_hidden: state.h })
}

/// Greedy max decoding: per clip, argmax word until EOS or the 30-token cap,
/// threading each sentence's final hidden state to the next clip.
pub fn greedy_decode(
    model: &GeneratorModel,
    video: &VideoRecord,
) -> Result<Paragraph, GeneratorError> {
    let mut context = DecoderContext::start(model.arch.hidden);
    let mut sentences = Vec::with_capacity(video.clips.len());
    for clip in &video.clips {
        let sentence = roll_sentence(model, &clip.features, &context, |dist, _| {
            Ok(argmax_lowest_index(dist) as TokenId)
        })?;
        context = DecoderContext(sentence.final_hidden.clone());
        sentences.push(sentence);
    }
    Ok(Paragraph { video_id: video.video_id.clone(), sentences })
}

/// Sample K sentences for one clip with temperature `tau`; candidate `j`
/// draws from an independent sub-stream of `seed`.
pub fn sample_sentences(
    model: &GeneratorModel,
    clip: &ClipFeatures,
    context: &DecoderContext,
    k: usize,
    tau: f64,
    seed: u64,
) -> Result<CandidateSet, GeneratorError> {
    if k == 0 {
        return Err(GeneratorError::Invalid { detail: "K must be at least 1".to_string() });
    }
    let mut candidates = Vec::with_capacity(k);
    for j in 0..k {
        let mut rng = rng_from(derive_seed(seed, &[0x73616d70, j as u64]));
        let sentence = roll_sentence(model, clip, context, |dist, _| {
            let shaped = softmax_with_temperature(dist, tau)?;
            Ok(categorical(&mut rng, &shaped) as TokenId)
        })?;
        candidates.push(sentence);
    }
    Ok(CandidateSet { candidates })
}

/// Highest length-normalized log-probability; ties break to the lowest
/// candidate index.
pub fn logprob_rerank(set: &CandidateSet) -> Result<usize, GeneratorError> {
    if set.candidates.is_empty() {
        return Err(GeneratorError::Invalid { detail: "empty candidate set".to_string() });
    }
    let mut best = 0;
    for (i, cand) in set.candidates.iter().enumerate().skip(1) {
        if cand.normalized_logprob() > set.candidates[best].normalized_logprob() {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Clone)]
struct BeamHyp {
    tokens: Vec<TokenId>,
    logprobs: Vec<f64>,
    sum: f64,
    state: LstmState,
    finished: bool,
}

impl BeamHyp {
    fn normalized(&self) -> f64 {
        self.sum / self.tokens.len().max(1) as f64
    }
}

/// Length-normalized beam search per sentence; the best hypothesis's hidden
/// state becomes the next clip's context.
pub fn beam_search(
    model: &GeneratorModel,
    video: &VideoRecord,
    beam: usize,
) -> Result<Paragraph, GeneratorError> {
    if beam < 1 {
        return Err(GeneratorError::Invalid { detail: "beam must be at least 1".to_string() });
    }
    let mut context = DecoderContext::start(model.arch.hidden);
    let mut sentences = Vec::with_capacity(video.clips.len());
    for clip in &video.clips {
        let sentence = beam_sentence(model, &clip.features, &context, beam)?;
        context = DecoderContext(sentence.final_hidden.clone());
        sentences.push(sentence);
    }
    Ok(Paragraph { video_id: video.video_id.clone(), sentences })
}

fn beam_sentence(
    model: &GeneratorModel,
    clip: &ClipFeatures,
    context: &DecoderContext,
    beam: usize,
) -> Result<SampledSentence, GeneratorError> {
    let start = BeamHyp {
        tokens: Vec::new(),
        logprobs: Vec::new(),
        sum: 0.0,
        state: LstmState::zeros(model.arch.hidden),
        finished: false,
    };
    let mut live = vec![start];
    let mut finished: Vec<BeamHyp> = Vec::new();
    for step in 0..=MAX_SENTENCE_TOKENS {
        let mut expansions: Vec<BeamHyp> = Vec::new();
        for hyp in &live {
            let prev = hyp.tokens.last().copied().unwrap_or(BOS);
            let (raw, next_state) = decode_step(model, clip, prev, &hyp.state, context)?;
            let mut dist = raw.clone();
            mask_specials(&mut dist);
            if step == MAX_SENTENCE_TOKENS {
                // Cap reached: force EOS.
                let mut done = hyp.clone();
                let lp = raw[EOS as usize].max(f64::MIN_POSITIVE).ln();
                done.tokens.push(EOS);
                done.logprobs.push(lp);
                done.sum += lp;
                done.state = next_state;
                done.finished = true;
                finished.push(done);
                continue;
            }
            for (token, &p) in dist.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let lp = raw[token].max(f64::MIN_POSITIVE).ln();
                let mut ext = hyp.clone();
                ext.tokens.push(token as TokenId);
                ext.logprobs.push(lp);
                ext.sum += lp;
                ext.state = next_state.clone();
                ext.finished = token as TokenId == EOS;
                expansions.push(ext);
            }
        }
        if expansions.is_empty() {
            break;
        }
        // Keep the top `beam` expansions by cumulative log-probability
        // (stable: ties keep earlier token indices first).
        expansions.sort_by(|a, b| b.sum.partial_cmp(&a.sum).unwrap_or(std::cmp::Ordering::Equal));
        expansions.truncate(beam);
        live = Vec::new();
        for hyp in expansions {
            if hyp.finished {
                finished.push(hyp);
            } else {
                live.push(hyp);
            }
        }
        if live.is_empty() {
            break;
        }
    }
    let pool = if finished.is_empty() { live } else { finished };
    let mut best = 0;
    for (i, hyp) in pool.iter().enumerate().skip(1) {
        if hyp.normalized() > pool[best].normalized() {
            best = i;
        }
    }
    let hyp = pool.into_iter().nth(best).expect("beam pool is nonempty");
    Ok(SampledSentence {
        logprob: hyp.sum,
        tokens: hyp.tokens,
        token_logprobs: hyp.logprobs,
        final_hidden: hyp.state.h,
    })
}
