//! Gradient-integrity harness: finite-difference verification of every
//! trained score/loss path on randomized small shapes. Used by the
//! integration tests and the acceptance suite; construction failures panic
//! (this is a test harness, not production surface).

use rand::Rng;

use crate::corpus::{ClipFeatures, FeatureDims, TokenId, Vocabulary, EOS};
use crate::discriminators::{DiscArch, LanguageDisc, PairwiseDisc, VisualDisc, VocabShape};
use crate::generator::{bind_generator, decode_step_graph, GeneratorArch, GeneratorModel};
use crate::substrate::{
    grad_check, rng_from, GradCheckReport, Graph, ParamStore, SubstrateError, Tensor, Var,
    DEFAULT_FD_STEP,
};

pub const GRAD_REL_TOL: f64 = 1e-4;

#[derive(Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub seed: u64,
    pub report: GradCheckReport,
}

const DIMS: FeatureDims = FeatureDims { motion: 4, appearance: 4, objects: 8 };

fn small_vocab() -> Vocabulary {
    Vocabulary::from_tokens((0..10).map(|i| format!("w{i}")))
}

fn random_clip(rng: &mut rand_chacha::ChaCha8Rng) -> ClipFeatures {
    let fill = |rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha8Rng, unit: bool| {
        let data = (0..rows * cols)
            .map(|_| if unit { rng.gen_range(0.0..=1.0) } else { rng.gen_range(-1.0..=1.0) })
            .collect();
        Tensor::matrix(rows, cols, data).expect("consistent dims")
    };
    ClipFeatures::new(
        fill(10, DIMS.motion, rng, false),
        fill(10, DIMS.appearance, rng, false),
        fill(3, DIMS.objects, rng, true),
    )
    .expect("valid features")
}

fn random_sentence(rng: &mut rand_chacha::ChaCha8Rng, vocab: &Vocabulary, len: usize) -> Vec<TokenId> {
    (0..len)
        .map(|_| rng.gen_range(crate::corpus::NUM_SPECIALS..vocab.size()) as TokenId)
        .collect()
}

/// Run every scenario for `seeds_per_case` randomized seeds. Each result
/// carries the worst relative error across all parameter coordinates.
pub fn gradient_integrity_suite(seeds_per_case: usize) -> Vec<SuiteResult> {
    let mut results = Vec::new();
    for seed in 0..seeds_per_case as u64 {
        results.push(decode_step_case(seed));
        results.push(visual_case(seed));
        results.push(language_case(seed));
        results.push(pairwise_case(seed));
        results.push(scst_case(seed));
    }
    results
}

fn run_case(
    name: &'static str,
    seed: u64,
    store: ParamStore,
    eval: impl Fn(&ParamStore) -> Result<f64, SubstrateError>,
    backward: impl Fn(&ParamStore) -> crate::substrate::Grads,
) -> SuiteResult {
    let mut store = store;
    let names: Vec<String> = store.names().cloned().collect();
    let analytic = backward(&store);
    let report = grad_check(&mut store, &names, &analytic, eval, GRAD_REL_TOL, DEFAULT_FD_STEP)
        .expect("grad check harness");
    SuiteResult { name, seed, report }
}

/// Teacher-forced cross entropy of one short sentence through the full
/// decode step (attention, cell, projection, embedding).
fn decode_step_case(seed: u64) -> SuiteResult {
    let vocab = small_vocab();
    let mut rng = rng_from(seed.wrapping_add(0xd5));
    let clip = random_clip(&mut rng);
    let arch = GeneratorArch { hidden: 6, embed: 5, attn: 4 };
    let model =
        GeneratorModel::new(vocab.size(), DIMS, arch, seed).expect("model init");
    let mut targets = random_sentence(&mut rng, &vocab, 3);
    targets.push(EOS);
    let context: Vec<f64> = (0..arch.hidden).map(|_| rng.gen_range(-0.5..=0.5)).collect();

    let build = move |model: &GeneratorModel, g: &mut Graph| -> Result<Var, SubstrateError> {
        let vars = bind_generator(g, model)?;
        let mut h = g.constant(Tensor::zeros(&[model.arch.hidden]))?;
        let mut c = g.constant(Tensor::zeros(&[model.arch.hidden]))?;
        let ctx = g.constant(Tensor::vector(context.clone()))?;
        let mut prev = crate::corpus::BOS;
        let mut loss: Option<Var> = None;
        for &t in &targets {
            let (logits, h2, c2) = decode_step_graph(g, &vars, &clip, prev, h, c, ctx)?;
            h = h2;
            c = c2;
            let lp = g.log_softmax(logits)?;
            let picked = g.pick(lp, t as usize)?;
            let nll = g.scale(picked, -1.0)?;
            loss = Some(match loss {
                Some(l) => g.add(l, nll)?,
                None => nll,
            });
            prev = t;
        }
        Ok(loss.expect("nonempty targets"))
    };

    let shell = model.clone();
    let eval = {
        let build = build.clone();
        move |store: &ParamStore| -> Result<f64, SubstrateError> {
            let m = GeneratorModel { store: store.clone(), ..shell.clone() };
            let mut g = Graph::new();
            let loss = build(&m, &mut g)?;
            Ok(g.value(loss).item())
        }
    };
    let shell2 = model.clone();
    let backward = move |store: &ParamStore| {
        let m = GeneratorModel { store: store.clone(), ..shell2.clone() };
        let mut g = Graph::new();
        let loss = build(&m, &mut g).expect("loss builds");
        g.backward(loss).expect("backward")
    };
    run_case("decode_step_loss", seed, model.store.clone(), eval, backward)
}

fn disc_arch() -> DiscArch {
    DiscArch { bow_embed: 6, mlb: 5, embed: 5, hidden: 5, attn: 4 }
}

fn visual_case(seed: u64) -> SuiteResult {
    let vocab = small_vocab();
    let mut rng = rng_from(seed.wrapping_add(0x76));
    let clip = random_clip(&mut rng);
    let tokens = random_sentence(&mut rng, &vocab, 4);
    let disc = VisualDisc::new(VocabShape::of(&vocab), DIMS, disc_arch(), seed).expect("init");
    let shell = disc.clone();
    let vocab2 = vocab.clone();
    let tokens2 = tokens.clone();
    let clip2 = clip.clone();
    let eval = move |store: &ParamStore| -> Result<f64, SubstrateError> {
        let d = VisualDisc { store: store.clone(), ..shell.clone() };
        let mut g = Graph::new();
        let s = d
            .score_graph(&mut g, &vocab2, &tokens2, &clip2)
            .map_err(|e| SubstrateError::Checkpoint { detail: e.to_string() })?;
        Ok(g.value(s).item())
    };
    let shell2 = disc.clone();
    let backward = move |store: &ParamStore| {
        let d = VisualDisc { store: store.clone(), ..shell2.clone() };
        let mut g = Graph::new();
        let s = d.score_graph(&mut g, &vocab, &tokens, &clip).expect("score builds");
        g.backward(s).expect("backward")
    };
    run_case("visual_score", seed, disc.store.clone(), eval, backward)
}

fn language_case(seed: u64) -> SuiteResult {
    let vocab = small_vocab();
    let mut rng = rng_from(seed.wrapping_add(0x6c));
    let tokens = random_sentence(&mut rng, &vocab, 5);
    let disc = LanguageDisc::new(VocabShape::of(&vocab), disc_arch(), seed).expect("init");
    let shell = disc.clone();
    let tokens2 = tokens.clone();
    let eval = move |store: &ParamStore| -> Result<f64, SubstrateError> {
        let d = LanguageDisc { store: store.clone(), ..shell.clone() };
        let mut g = Graph::new();
        let s = d
            .score_graph(&mut g, &tokens2)
            .map_err(|e| SubstrateError::Checkpoint { detail: e.to_string() })?;
        Ok(g.value(s).item())
    };
    let shell2 = disc.clone();
    let backward = move |store: &ParamStore| {
        let d = LanguageDisc { store: store.clone(), ..shell2.clone() };
        let mut g = Graph::new();
        let s = d.score_graph(&mut g, &tokens).expect("score builds");
        g.backward(s).expect("backward")
    };
    run_case("language_score", seed, disc.store.clone(), eval, backward)
}

fn pairwise_case(seed: u64) -> SuiteResult {
    let vocab = small_vocab();
    let mut rng = rng_from(seed.wrapping_add(0x70));
    let prev = random_sentence(&mut rng, &vocab, 4);
    let cur = random_sentence(&mut rng, &vocab, 3);
    let disc = PairwiseDisc::new(VocabShape::of(&vocab), disc_arch(), seed).expect("init");
    let shell = disc.clone();
    let (prev2, cur2) = (prev.clone(), cur.clone());
    let eval = move |store: &ParamStore| -> Result<f64, SubstrateError> {
        let d = PairwiseDisc { store: store.clone(), ..shell.clone() };
        let mut g = Graph::new();
        let s = d
            .score_graph(&mut g, &prev2, &cur2)
            .map_err(|e| SubstrateError::Checkpoint { detail: e.to_string() })?;
        Ok(g.value(s).item())
    };
    let shell2 = disc.clone();
    let backward = move |store: &ParamStore| {
        let d = PairwiseDisc { store: store.clone(), ..shell2.clone() };
        let mut g = Graph::new();
        let s = d.score_graph(&mut g, &prev, &cur).expect("score builds");
        g.backward(s).expect("backward")
    };
    run_case("pairwise_score", seed, disc.store.clone(), eval, backward)
}

/// The SCST surrogate: −Δr · Σ_t log p(x_t) for a fixed sampled trajectory
/// and a fixed reward difference.
fn scst_case(seed: u64) -> SuiteResult {
    let vocab = small_vocab();
    let mut rng = rng_from(seed.wrapping_add(0x5c));
    let clip = random_clip(&mut rng);
    let arch = GeneratorArch { hidden: 6, embed: 5, attn: 4 };
    let model = GeneratorModel::new(vocab.size(), DIMS, arch, seed).expect("model init");
    let mut tokens = random_sentence(&mut rng, &vocab, 3);
    tokens.push(EOS);
    let diff = 0.7;

    let build = move |model: &GeneratorModel, g: &mut Graph| -> Result<Var, SubstrateError> {
        let vars = bind_generator(g, model)?;
        let mut h = g.constant(Tensor::zeros(&[model.arch.hidden]))?;
        let mut c = g.constant(Tensor::zeros(&[model.arch.hidden]))?;
        let ctx = g.constant(Tensor::zeros(&[model.arch.hidden]))?;
        let mut prev = crate::corpus::BOS;
        let mut sum: Option<Var> = None;
        for &t in &tokens {
            let (logits, h2, c2) = decode_step_graph(g, &vars, &clip, prev, h, c, ctx)?;
            h = h2;
            c = c2;
            let lp = g.log_softmax(logits)?;
            let picked = g.pick(lp, t as usize)?;
            sum = Some(match sum {
                Some(s) => g.add(s, picked)?,
                None => picked,
            });
            prev = t;
        }
        g.scale(sum.expect("nonempty"), -diff)
    };

    let shell = model.clone();
    let eval = {
        let build = build.clone();
        move |store: &ParamStore| -> Result<f64, SubstrateError> {
            let m = GeneratorModel { store: store.clone(), ..shell.clone() };
            let mut g = Graph::new();
            let loss = build(&m, &mut g)?;
            Ok(g.value(loss).item())
        }
    };
    let shell2 = model.clone();
    let backward = move |store: &ParamStore| {
        let m = GeneratorModel { store: store.clone(), ..shell2.clone() };
        let mut g = Graph::new();
        let loss = build(&m, &mut g).expect("loss builds");
        g.backward(loss).expect("backward")
    };
    run_case("scst_surrogate", seed, model.store.clone(), eval, backward)
}
