//! Synthetic multimodal corpus: generation, serialization, tokenization and
//! vocabulary.

pub mod io;
pub mod synth;
pub mod types;
pub mod vocab;

pub use io::{load_corpus, load_corpus_file, save_corpus, save_corpus_file, CORPUS_FORMAT_VERSION};
pub use synth::{assign_splits, gen_synthetic_corpus, quantize9, SynthLexicon};
pub use types::{
    Clip, ClipFeatures, ClipLatent, CorpusBundle, CorpusSpec, FeatureDims, Gender, Plurality,
    Split, Splits, VideoRecord,
};
pub use vocab::{
    bow_vector, build_vocabulary, detokenize, encode_sentence, tokenize, TokenId, Vocabulary, BOS,
    EOS, MAX_SENTENCE_TOKENS, NUM_SPECIALS, PAD, UNK,
};

use crate::substrate::SubstrateError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid corpus spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("invalid clip features: {detail}")]
    InvalidFeatures { detail: String },
    #[error("corpus format error: {detail}")]
    Format { detail: String },
    #[error("corpus format version {found} is not supported (reader expects {expected})")]
    Version { found: u64, expected: u32 },
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
}
