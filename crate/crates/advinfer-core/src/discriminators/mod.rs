//! The three specialized discriminators (visual relevance, language quality,
//! pairwise coherence), the single-discriminator baseline, the negative
//! factory and the shared training objective.
//!
//! Discriminator inputs are sentence content tokens: BOS/EOS/PAD stripped,
//! UNK kept. Every score is a sigmoid (or a convex combination of sigmoids)
//! and therefore lies strictly in (0, 1).

pub mod negatives;
pub mod train;

pub use negatives::{make_negatives, NegativeAudit, NegativeKind, NegativeSample, NegativeSpec};
pub use train::{
    disc_objective, held_out_accuracy, own_eval_kinds, train_discriminator, AccuracyReport,
    DiscTrainConfig, DiscTrainOutput, EpochAccuracy,
};

use std::collections::BTreeMap;

use crate::corpus::{bow_vector, ClipFeatures, FeatureDims, TokenId, Vocabulary};
use crate::substrate::{
    bilstm_encode, rng_from, temporal_attention, AttentionSpec, Graph, LstmSpec, ParamStore,
    SubstrateError, Tensor, Var,
};

#[derive(Debug, thiserror::Error)]
pub enum DiscError {
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error("empty sentence passed to a discriminator")]
    EmptySentence,
    #[error("invalid discriminator input: {detail}")]
    Invalid { detail: String },
    #[error("training diverged at epoch {epoch}: {detail}; parameters rolled back")]
    Diverged { epoch: usize, detail: String },
}

/// Model sizes shared by the discriminator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscArch {
    /// BOW embedding width (the visual discriminator's sentence code).
    pub bow_embed: usize,
    /// Low-rank bilinear fusion width.
    pub mlb: usize,
    /// Word embedding width for the recurrent encoders.
    pub embed: usize,
    /// Recurrent encoder hidden width (per direction).
    pub hidden: usize,
    /// Temporal-attention scorer width.
    pub attn: usize,
}

impl Default for DiscArch {
    fn default() -> Self {
        Self { bow_embed: 256, mlb: 256, embed: 300, hidden: 512, attn: 64 }
    }
}

pub const MODALITIES: [&str; 3] = ["motion", "appearance", "objects"];

fn seg_dim(dims: FeatureDims, modality: &str) -> usize {
    match modality {
        "motion" => dims.motion,
        "appearance" => dims.appearance,
        _ => dims.objects,
    }
}

/// Strip structural specials (PAD/BOS/EOS); UNK stays.
pub fn content_tokens(ids: &[TokenId]) -> Vec<TokenId> {
    ids.iter().copied().filter(|&t| t != crate::corpus::PAD && t != crate::corpus::BOS && t != crate::corpus::EOS).collect()
}

/// Visual relevance: BOW sentence code, per-modality temporal attention
/// queried by it, low-rank bilinear fusion per modality, and learned
/// sentence-conditioned modality weights.
#[derive(Debug, Clone)]
pub struct VisualDisc {
    pub vocab: VocabShape,
    pub dims: FeatureDims,
    pub arch: DiscArch,
    pub store: ParamStore,
}

/// Vocabulary shape a discriminator was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabShape {
    pub size: usize,
    pub content_size: usize,
}

impl VocabShape {
    pub fn of(vocab: &Vocabulary) -> Self {
        Self { size: vocab.size(), content_size: vocab.content_size() }
    }
}

impl VisualDisc {
    pub fn new(
        vocab: VocabShape,
        dims: FeatureDims,
        arch: DiscArch,
        seed: u64,
    ) -> Result<Self, DiscError> {
        let mut store = ParamStore::new();
        let mut rng = rng_from(crate::substrate::derive_seed(seed, &[0x6456]));
        let bow_bound = 1.0 / (vocab.content_size.max(1) as f64).sqrt();
        store.insert(
            "dv.bow.w",
            crate::substrate::nn::init_matrix(&mut rng, arch.bow_embed, vocab.content_size, bow_bound),
        )?;
        store.insert("dv.bow.b", Tensor::zeros(&[arch.bow_embed]))?;
        for m in MODALITIES {
            AttentionSpec::new(format!("dv.att.{m}"), arch.bow_embed, seg_dim(dims, m), arch.attn)
                .init(&mut store, &mut rng)?;
            let ub = 1.0 / (seg_dim(dims, m) as f64).sqrt();
            let vb = 1.0 / (arch.bow_embed as f64).sqrt();
            let rb = 1.0 / (arch.mlb as f64).sqrt();
            store.insert(
                &format!("dv.mlb.{m}.u"),
                crate::substrate::nn::init_matrix(&mut rng, arch.mlb, seg_dim(dims, m), ub),
            )?;
            store.insert(
                &format!("dv.mlb.{m}.v"),
                crate::substrate::nn::init_matrix(&mut rng, arch.mlb, arch.bow_embed, vb),
            )?;
            store.insert(
                &format!("dv.mlb.{m}.r"),
                crate::substrate::nn::init_vector(&mut rng, arch.mlb, rb),
            )?;
            store.insert(&format!("dv.mlb.{m}.c"), Tensor::zeros(&[1]))?;
            store.insert(
                &format!("dv.weight.{m}.a"),
                crate::substrate::nn::init_vector(&mut rng, arch.bow_embed, vb),
            )?;
        }
        Ok(Self { vocab, dims, arch, store })
    }

    /// Score graph for (sentence, clip). The BOW code is order-free by
    /// construction, so the score is exactly invariant to token order.
    pub(crate) fn score_graph(
        &self,
        g: &mut Graph,
        vocab: &Vocabulary,
        tokens: &[TokenId],
        clip: &ClipFeatures,
    ) -> Result<Var, DiscError> {
        let tokens = content_tokens(tokens);
        if tokens.is_empty() {
            return Err(DiscError::EmptySentence);
        }
        let bow = g.constant(Tensor::vector(bow_vector(vocab, &tokens)))?;
        let bow_w = g.param(&self.store, "dv.bow.w")?;
        let bow_b = g.param(&self.store, "dv.bow.b")?;
        let omega = g.affine(bow_w, bow, bow_b)?;

        let segments = [
            g.constant_shared(clip.motion.clone())?,
            g.constant_shared(clip.appearance.clone())?,
            g.constant_shared(clip.objects.clone())?,
        ];
        let mut p_scores = Vec::with_capacity(3);
        let mut weight_logits = Vec::with_capacity(3);
        for (m, segs) in MODALITIES.iter().zip(segments) {
            let att = AttentionSpec::new(
                format!("dv.att.{m}"),
                self.arch.bow_embed,
                seg_dim(self.dims, m),
                self.arch.attn,
            )
            .bind(g, &self.store)?;
            let (v_hat, _) = temporal_attention(g, &att, omega, segs)?;
            let u = g.param(&self.store, &format!("dv.mlb.{m}.u"))?;
            let v = g.param(&self.store, &format!("dv.mlb.{m}.v"))?;
            let r = g.param(&self.store, &format!("dv.mlb.{m}.r"))?;
            let c = g.param(&self.store, &format!("dv.mlb.{m}.c"))?;
            let tu = {
                let uv = g.matvec(u, v_hat)?;
                g.tanh(uv)?
            };
            let tv = {
                let vo = g.matvec(v, omega)?;
                g.tanh(vo)?
            };
            let fused = g.mul(tu, tv)?;
            let reduced = {
                let d = g.dot(r, fused)?;
                g.add(d, c)?
            };
            p_scores.push(g.sigmoid(reduced)?);
            let a = g.param(&self.store, &format!("dv.weight.{m}.a"))?;
            weight_logits.push(g.dot(a, omega)?);
        }
        let logits = g.concat(&weight_logits)?;
        let lambda = g.softmax(logits)?;
        let p_vec = g.concat(&p_scores)?;
        Ok(g.dot(lambda, p_vec)?)
    }

    /// Sentence-conditioned modality weights λ (diagnostic).
    pub fn modality_weights(
        &self,
        vocab: &Vocabulary,
        tokens: &[TokenId],
    ) -> Result<Vec<f64>, DiscError> {
        let tokens = content_tokens(tokens);
        if tokens.is_empty() {
            return Err(DiscError::EmptySentence);
        }
        let mut g = Graph::new();
        let bow = g.constant(Tensor::vector(bow_vector(vocab, &tokens)))?;
        let bow_w = g.param(&self.store, "dv.bow.w")?;
        let bow_b = g.param(&self.store, "dv.bow.b")?;
        let omega = g.affine(bow_w, bow, bow_b)?;
        let mut logits = Vec::new();
        for m in MODALITIES {
            let a = g.param(&self.store, &format!("dv.weight.{m}.a"))?;
            logits.push(g.dot(a, omega)?);
        }
        let cat = g.concat(&logits)?;
        let lambda = g.softmax(cat)?;
        Ok(g.value(lambda).data().to_vec())
    }
}

/// Visual relevance score in (0, 1).
pub fn visual_score(
    disc: &VisualDisc,
    vocab: &Vocabulary,
    tokens: &[TokenId],
    clip: &ClipFeatures,
) -> Result<f64, DiscError> {
    let mut g = Graph::new();
    let s = disc.score_graph(&mut g, vocab, tokens, clip)?;
    Ok(g.value(s).item())
}

/// Language quality: bidirectional encoder, concatenated last hidden states,
/// affine head, sigmoid.
#[derive(Debug, Clone)]
pub struct LanguageDisc {
    pub vocab: VocabShape,
    pub arch: DiscArch,
    pub store: ParamStore,
}

fn init_encoder(
    store: &mut ParamStore,
    rng: &mut rand_chacha::ChaCha8Rng,
    prefix: &str,
    vocab_size: usize,
    arch: DiscArch,
) -> Result<(), DiscError> {
    store.insert(
        &format!("{prefix}.embed"),
        crate::substrate::nn::init_matrix(rng, vocab_size, arch.embed, 0.1),
    )?;
    LstmSpec::new(format!("{prefix}.fwd"), arch.embed, arch.hidden).init(store, rng)?;
    LstmSpec::new(format!("{prefix}.bwd"), arch.embed, arch.hidden).init(store, rng)?;
    Ok(())
}

fn encode_sentence_graph(
    g: &mut Graph,
    store: &ParamStore,
    prefix: &str,
    arch: DiscArch,
    tokens: &[TokenId],
) -> Result<Var, DiscError> {
    if tokens.is_empty() {
        return Err(DiscError::EmptySentence);
    }
    let embed = g.param(store, &format!("{prefix}.embed"))?;
    let inputs: Vec<Var> = tokens
        .iter()
        .map(|&t| g.row(embed, t as usize))
        .collect::<Result<_, _>>()?;
    let fwd = LstmSpec::new(format!("{prefix}.fwd"), arch.embed, arch.hidden).bind(g, store)?;
    let bwd = LstmSpec::new(format!("{prefix}.bwd"), arch.embed, arch.hidden).bind(g, store)?;
    Ok(bilstm_encode(g, &fwd, &bwd, &inputs)?)
}

impl LanguageDisc {
    pub fn new(vocab: VocabShape, arch: DiscArch, seed: u64) -> Result<Self, DiscError> {
        let mut store = ParamStore::new();
        let mut rng = rng_from(crate::substrate::derive_seed(seed, &[0x646c]));
        init_encoder(&mut store, &mut rng, "dl", vocab.size, arch)?;
        let hb = 1.0 / ((2 * arch.hidden) as f64).sqrt();
        store.insert(
            "dl.head.w",
            crate::substrate::nn::init_matrix(&mut rng, 1, 2 * arch.hidden, hb),
        )?;
        store.insert("dl.head.b", Tensor::zeros(&[1]))?;
        Ok(Self { vocab, arch, store })
    }

    pub(crate) fn score_graph(
        &self,
        g: &mut Graph,
        tokens: &[TokenId],
    ) -> Result<Var, DiscError> {
        let tokens = content_tokens(tokens);
        let enc = encode_sentence_graph(g, &self.store, "dl", self.arch, &tokens)?;
        let w = g.param(&self.store, "dl.head.w")?;
        let b = g.param(&self.store, "dl.head.b")?;
        let z = g.affine(w, enc, b)?;
        Ok(g.sigmoid(z)?)
    }
}

pub fn language_score(disc: &LanguageDisc, tokens: &[TokenId]) -> Result<f64, DiscError> {
    let mut g = Graph::new();
    let s = disc.score_graph(&mut g, tokens)?;
    Ok(g.value(s).item())
}

/// Pairwise coherence: both sentences run through one shared bidirectional
/// encoder; the concatenated codes feed an affine head and sigmoid. The
/// first sentence of a paragraph is never given a pairwise score — callers
/// must not invoke this for it.
#[derive(Debug, Clone)]
pub struct PairwiseDisc {
    pub vocab: VocabShape,
    pub arch: DiscArch,
    pub store: ParamStore,
}

impl PairwiseDisc {
    pub fn new(vocab: VocabShape, arch: DiscArch, seed: u64) -> Result<Self, DiscError> {
        let mut store = ParamStore::new();
        let mut rng = rng_from(crate::substrate::derive_seed(seed, &[0x6470]));
        init_encoder(&mut store, &mut rng, "dp", vocab.size, arch)?;
        let hb = 1.0 / ((4 * arch.hidden) as f64).sqrt();
        store.insert(
            "dp.head.w",
            crate::substrate::nn::init_matrix(&mut rng, 1, 4 * arch.hidden, hb),
        )?;
        store.insert("dp.head.b", Tensor::zeros(&[1]))?;
        Ok(Self { vocab, arch, store })
    }

    pub(crate) fn score_graph(
        &self,
        g: &mut Graph,
        prev: &[TokenId],
        cur: &[TokenId],
    ) -> Result<Var, DiscError> {
        let prev = content_tokens(prev);
        let cur = content_tokens(cur);
        let enc_prev = encode_sentence_graph(g, &self.store, "dp", self.arch, &prev)?;
        let enc_cur = encode_sentence_graph(g, &self.store, "dp", self.arch, &cur)?;
        let both = g.concat(&[enc_prev, enc_cur])?;
        let w = g.param(&self.store, "dp.head.w")?;
        let b = g.param(&self.store, "dp.head.b")?;
        let z = g.affine(w, both, b)?;
        Ok(g.sigmoid(z)?)
    }
}

pub fn pairwise_score(
    disc: &PairwiseDisc,
    prev: &[TokenId],
    cur: &[TokenId],
) -> Result<f64, DiscError> {
    let mut g = Graph::new();
    let s = disc.score_graph(&mut g, prev, cur)?;
    Ok(g.value(s).item())
}

/// Single-discriminator baseline: recurrent sentence encoding (not BOW)
/// fused with attended visual features, affine head, sigmoid.
#[derive(Debug, Clone)]
pub struct SingleDisc {
    pub vocab: VocabShape,
    pub dims: FeatureDims,
    pub arch: DiscArch,
    pub store: ParamStore,
}

impl SingleDisc {
    pub fn new(
        vocab: VocabShape,
        dims: FeatureDims,
        arch: DiscArch,
        seed: u64,
    ) -> Result<Self, DiscError> {
        let mut store = ParamStore::new();
        let mut rng = rng_from(crate::substrate::derive_seed(seed, &[0x6473]));
        init_encoder(&mut store, &mut rng, "ds", vocab.size, arch)?;
        for m in MODALITIES {
            AttentionSpec::new(format!("ds.att.{m}"), 2 * arch.hidden, seg_dim(dims, m), arch.attn)
                .init(&mut store, &mut rng)?;
        }
        let fused = 2 * arch.hidden + dims.motion + dims.appearance + dims.objects;
        let hb = 1.0 / (fused as f64).sqrt();
        store.insert("ds.head.w", crate::substrate::nn::init_matrix(&mut rng, 1, fused, hb))?;
        store.insert("ds.head.b", Tensor::zeros(&[1]))?;
        Ok(Self { vocab, dims, arch, store })
    }

    pub(crate) fn score_graph(
        &self,
        g: &mut Graph,
        tokens: &[TokenId],
        clip: &ClipFeatures,
    ) -> Result<Var, DiscError> {
        let tokens = content_tokens(tokens);
        let enc = encode_sentence_graph(g, &self.store, "ds", self.arch, &tokens)?;
        let segments = [
            g.constant_shared(clip.motion.clone())?,
            g.constant_shared(clip.appearance.clone())?,
            g.constant_shared(clip.objects.clone())?,
        ];
        let mut parts = vec![enc];
        for (m, segs) in MODALITIES.iter().zip(segments) {
            let att = AttentionSpec::new(
                format!("ds.att.{m}"),
                2 * self.arch.hidden,
                seg_dim(self.dims, m),
                self.arch.attn,
            )
            .bind(g, &self.store)?;
            let (v_hat, _) = temporal_attention(g, &att, enc, segs)?;
            parts.push(v_hat);
        }
        let fused = g.concat(&parts)?;
        let w = g.param(&self.store, "ds.head.w")?;
        let b = g.param(&self.store, "ds.head.b")?;
        let z = g.affine(w, fused, b)?;
        Ok(g.sigmoid(z)?)
    }
}

pub fn single_disc_score(
    disc: &SingleDisc,
    tokens: &[TokenId],
    clip: &ClipFeatures,
) -> Result<f64, DiscError> {
    let mut g = Graph::new();
    let s = disc.score_graph(&mut g, tokens, clip)?;
    Ok(g.value(s).item())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscKind {
    Visual,
    Language,
    Pairwise,
    Single,
}

impl DiscKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiscKind::Visual => "visual",
            DiscKind::Language => "language",
            DiscKind::Pairwise => "pairwise",
            DiscKind::Single => "single",
        }
    }
}

/// Any of the four trainable discriminators.
#[derive(Debug, Clone)]
pub enum Discriminator {
    Visual(VisualDisc),
    Language(LanguageDisc),
    Pairwise(PairwiseDisc),
    Single(SingleDisc),
}

impl Discriminator {
    pub fn kind(&self) -> DiscKind {
        match self {
            Discriminator::Visual(_) => DiscKind::Visual,
            Discriminator::Language(_) => DiscKind::Language,
            Discriminator::Pairwise(_) => DiscKind::Pairwise,
            Discriminator::Single(_) => DiscKind::Single,
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Discriminator::Visual(d) => &d.store,
            Discriminator::Language(d) => &d.store,
            Discriminator::Pairwise(d) => &d.store,
            Discriminator::Single(d) => &d.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Discriminator::Visual(d) => &mut d.store,
            Discriminator::Language(d) => &mut d.store,
            Discriminator::Pairwise(d) => &mut d.store,
            Discriminator::Single(d) => &mut d.store,
        }
    }

    pub fn checkpoint_meta(&self, vocab_hash: &str) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("kind".to_string(), format!("disc_{}", self.kind().as_str()));
        meta.insert("vocab_hash".to_string(), vocab_hash.to_string());
        let (vocab, arch, dims) = match self {
            Discriminator::Visual(d) => (d.vocab, d.arch, Some(d.dims)),
            Discriminator::Language(d) => (d.vocab, d.arch, None),
            Discriminator::Pairwise(d) => (d.vocab, d.arch, None),
            Discriminator::Single(d) => (d.vocab, d.arch, Some(d.dims)),
        };
        meta.insert("vocab_size".to_string(), vocab.size.to_string());
        meta.insert("vocab_content".to_string(), vocab.content_size.to_string());
        meta.insert("bow_embed".to_string(), arch.bow_embed.to_string());
        meta.insert("mlb".to_string(), arch.mlb.to_string());
        meta.insert("embed".to_string(), arch.embed.to_string());
        meta.insert("hidden".to_string(), arch.hidden.to_string());
        meta.insert("attn".to_string(), arch.attn.to_string());
        if let Some(d) = dims {
            meta.insert("dim_motion".to_string(), d.motion.to_string());
            meta.insert("dim_appearance".to_string(), d.appearance.to_string());
            meta.insert("dim_objects".to_string(), d.objects.to_string());
        }
        meta
    }

    pub fn from_checkpoint(
        store: ParamStore,
        meta: &BTreeMap<String, String>,
    ) -> Result<Self, DiscError> {
        let get = |key: &str| -> Result<usize, DiscError> {
            meta.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| DiscError::Invalid { detail: format!("meta missing {key}") })
        };
        let vocab = VocabShape { size: get("vocab_size")?, content_size: get("vocab_content")? };
        let arch = DiscArch {
            bow_embed: get("bow_embed")?,
            mlb: get("mlb")?,
            embed: get("embed")?,
            hidden: get("hidden")?,
            attn: get("attn")?,
        };
        let dims = || -> Result<FeatureDims, DiscError> {
            Ok(FeatureDims {
                motion: get("dim_motion")?,
                appearance: get("dim_appearance")?,
                objects: get("dim_objects")?,
            })
        };
        match meta.get("kind").map(|s| s.as_str()) {
            Some("disc_visual") => {
                Ok(Discriminator::Visual(VisualDisc { vocab, dims: dims()?, arch, store }))
            }
            Some("disc_language") => Ok(Discriminator::Language(LanguageDisc { vocab, arch, store })),
            Some("disc_pairwise") => Ok(Discriminator::Pairwise(PairwiseDisc { vocab, arch, store })),
            Some("disc_single") => {
                Ok(Discriminator::Single(SingleDisc { vocab, dims: dims()?, arch, store }))
            }
            other => Err(DiscError::Invalid { detail: format!("unknown checkpoint kind {other:?}") }),
        }
    }
}

/// Overwrite embedding rows from an external text file of
/// `word v1 v2 ... vE` lines (words missing from the vocabulary are
/// skipped). Random initialization stays in place for uncovered rows.
pub fn load_external_embeddings(
    store: &mut ParamStore,
    param: &str,
    vocab: &Vocabulary,
    path: &std::path::Path,
) -> Result<usize, DiscError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DiscError::Invalid { detail: format!("{}: {e}", path.display()) })?;
    let dim = store.get(param)?.cols();
    let mut loaded = 0usize;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        if !vocab.contains(word) {
            continue;
        }
        let values: Vec<f64> = parts.map(|p| p.parse().unwrap_or(0.0)).collect();
        if values.len() != dim {
            return Err(DiscError::Invalid {
                detail: format!("embedding for {word:?} has {} dims, expected {dim}", values.len()),
            });
        }
        let id = vocab.id(word) as usize;
        let tensor = store.get_mut(param)?;
        let cols = tensor.cols();
        tensor.data_mut()[id * cols..(id + 1) * cols].copy_from_slice(&values);
        loaded += 1;
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_sentence, gen_synthetic_corpus, CorpusSpec};

    fn fixture() -> (crate::corpus::CorpusBundle, DiscArch) {
        let spec = CorpusSpec {
            num_videos: 6,
            clip_range: (2, 3),
            num_events: 4,
            num_activities: 2,
            noise_sigma: 0.1,
            feature_dims: FeatureDims { motion: 8, appearance: 8, objects: 10 },
        };
        let bundle = gen_synthetic_corpus(&spec, 33).unwrap();
        let arch = DiscArch { bow_embed: 12, mlb: 10, embed: 8, hidden: 8, attn: 6 };
        (bundle, arch)
    }

    #[test]
    fn visual_score_is_order_invariant_and_bounded() {
        let (bundle, arch) = fixture();
        let disc =
            VisualDisc::new(VocabShape::of(&bundle.vocab), bundle.spec.feature_dims, arch, 1)
                .unwrap();
        let clip = &bundle.videos[0].clips[0];
        let ids = encode_sentence(&bundle.vocab, &clip.refs[0]);
        let s1 = visual_score(&disc, &bundle.vocab, &ids, &clip.features).unwrap();
        assert!(s1 > 0.0 && s1 < 1.0);
        // Reverse the content tokens: BOW makes the score identical.
        let mut rev = content_tokens(&ids);
        rev.reverse();
        let s2 = visual_score(&disc, &bundle.vocab, &rev, &clip.features).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn modality_weights_are_uniform_for_equal_logits() {
        let (bundle, arch) = fixture();
        let mut disc =
            VisualDisc::new(VocabShape::of(&bundle.vocab), bundle.spec.feature_dims, arch, 1)
                .unwrap();
        for m in MODALITIES {
            let name = format!("dv.weight.{m}.a");
            let len = disc.store.get(&name).unwrap().len();
            *disc.store.get_mut(&name).unwrap() = Tensor::zeros(&[len]);
        }
        let ids = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[0].refs[0]);
        let lambda = disc.modality_weights(&bundle.vocab, &ids).unwrap();
        for w in lambda {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sentence_is_rejected_everywhere() {
        let (bundle, arch) = fixture();
        let shape = VocabShape::of(&bundle.vocab);
        let clip = &bundle.videos[0].clips[0];
        let vis = VisualDisc::new(shape, bundle.spec.feature_dims, arch, 1).unwrap();
        assert!(visual_score(&vis, &bundle.vocab, &[], &clip.features).is_err());
        let lang = LanguageDisc::new(shape, arch, 2).unwrap();
        assert!(language_score(&lang, &[]).is_err());
        let pair = PairwiseDisc::new(shape, arch, 3).unwrap();
        let ids = encode_sentence(&bundle.vocab, &clip.refs[0]);
        assert!(pairwise_score(&pair, &[], &ids).is_err());
        assert!(pairwise_score(&pair, &ids, &[]).is_err());
    }

    #[test]
    fn zero_heads_score_one_half() {
        let (bundle, arch) = fixture();
        let shape = VocabShape::of(&bundle.vocab);
        let ids = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[0].refs[0]);
        let ids2 = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[1].refs[0]);

        let mut lang = LanguageDisc::new(shape, arch, 2).unwrap();
        *lang.store.get_mut("dl.head.w").unwrap() = Tensor::zeros(&[1, 2 * arch.hidden]);
        *lang.store.get_mut("dl.head.b").unwrap() = Tensor::zeros(&[1]);
        assert_eq!(language_score(&lang, &ids).unwrap(), 0.5);

        let mut pair = PairwiseDisc::new(shape, arch, 3).unwrap();
        *pair.store.get_mut("dp.head.w").unwrap() = Tensor::zeros(&[1, 4 * arch.hidden]);
        *pair.store.get_mut("dp.head.b").unwrap() = Tensor::zeros(&[1]);
        assert_eq!(pairwise_score(&pair, &ids, &ids2).unwrap(), 0.5);

        let mut single =
            SingleDisc::new(shape, bundle.spec.feature_dims, arch, 4).unwrap();
        let fused = 2 * arch.hidden + 8 + 8 + 10;
        *single.store.get_mut("ds.head.w").unwrap() = Tensor::zeros(&[1, fused]);
        *single.store.get_mut("ds.head.b").unwrap() = Tensor::zeros(&[1]);
        let clip = &bundle.videos[0].clips[0];
        assert_eq!(single_disc_score(&single, &ids, &clip.features).unwrap(), 0.5);
    }

    #[test]
    fn pairwise_asymmetry_is_permitted() {
        let (bundle, arch) = fixture();
        let disc = PairwiseDisc::new(VocabShape::of(&bundle.vocab), arch, 9).unwrap();
        let a = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[0].refs[0]);
        let b = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[1].refs[0]);
        let ab = pairwise_score(&disc, &a, &b).unwrap();
        let ba = pairwise_score(&disc, &b, &a).unwrap();
        // Not asserted equal: the head sees an ordered concatenation.
        assert!(ab > 0.0 && ab < 1.0 && ba > 0.0 && ba < 1.0);
    }

    #[test]
    fn scores_survive_checkpoint_round_trip() {
        let (bundle, arch) = fixture();
        let disc = Discriminator::Language(LanguageDisc::new(VocabShape::of(&bundle.vocab), arch, 5).unwrap());
        let meta = disc.checkpoint_meta(&bundle.vocab.hash());
        let mut bytes = Vec::new();
        crate::substrate::save_checkpoint(disc.store(), &meta, &mut bytes).unwrap();
        let (store, meta2) = crate::substrate::load_checkpoint(bytes.as_slice()).unwrap();
        let restored = Discriminator::from_checkpoint(store, &meta2).unwrap();
        let ids = encode_sentence(&bundle.vocab, &bundle.videos[0].clips[0].refs[0]);
        let (Discriminator::Language(a), Discriminator::Language(b)) = (&disc, &restored) else {
            panic!("kind changed in round trip");
        };
        assert_eq!(language_score(a, &ids).unwrap(), language_score(b, &ids).unwrap());
    }

    #[test]
    fn external_embedding_load_overwrites_rows() {
        let (bundle, arch) = fixture();
        let mut lang = LanguageDisc::new(VocabShape::of(&bundle.vocab), arch, 5).unwrap();
        let word = bundle.vocab.content_tokens()[0].clone();
        let dir = std::env::temp_dir().join(format!("advinfer-emb-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("vectors.txt");
        let values: Vec<String> = (0..arch.embed).map(|i| format!("{}", i as f64 * 0.5)).collect();
        std::fs::write(&path, format!("{word} {}\nunknownword 1 2\n", values.join(" "))).unwrap();
        let loaded =
            load_external_embeddings(&mut lang.store, "dl.embed", &bundle.vocab, &path).unwrap();
        assert_eq!(loaded, 1);
        let id = bundle.vocab.id(&word) as usize;
        let row = lang.store.get("dl.embed").unwrap().row(id).to_vec();
        assert_eq!(row[1], 0.5);
        std::fs::remove_dir_all(&dir).ok();
    }
}
