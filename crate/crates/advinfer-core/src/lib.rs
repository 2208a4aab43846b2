//! Sample-and-select decoding for multi-sentence clip description.
//!
//! A maximum-likelihood sentence generator proposes candidate sentences per
//! clip, and trained discriminators (visual relevance, language quality,
//! pairwise coherence) pick the best candidate progressively through the
//! paragraph. The crate also carries SCST and GAN training baselines, a
//! synthetic multimodal corpus, and a diversity/repetition/correctness
//! evaluation suite.

pub mod corpus;
pub mod diagnostics;
pub mod discriminators;
pub mod generator;
pub mod inference;
pub mod metrics;
pub mod rlgan;
pub mod substrate;

pub use corpus::CorpusError;
pub use metrics::MetricsError;
pub use substrate::SubstrateError;
