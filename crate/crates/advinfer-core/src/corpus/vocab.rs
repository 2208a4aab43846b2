//! Vocabulary, tokenization and bag-of-words encoding.

use std::collections::{BTreeMap, HashMap};

use super::types::VideoRecord;
use super::CorpusError;

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;
pub const NUM_SPECIALS: usize = 4;

pub const SPECIAL_TOKENS: [&str; NUM_SPECIALS] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Sentences are cut at this many content words before wrapping in BOS/EOS.
pub const MAX_SENTENCE_TOKENS: usize = 30;

/// Bijective token ↔ id map with fixed special ids. Content ids start at
/// [`NUM_SPECIALS`]; every out-of-vocabulary token encodes to [`UNK`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Build from an explicit list of content tokens (deduplicated, order
    /// preserved).
    pub fn from_tokens<I, S>(content: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, TokenId> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        for t in content {
            let t = t.into();
            if !index.contains_key(&t) {
                index.insert(t.clone(), tokens.len() as TokenId);
                tokens.push(t);
            }
        }
        Self { tokens, index }
    }

    /// Total size including the four specials.
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Number of non-special tokens (the BOW dimension).
    pub fn content_size(&self) -> usize {
        self.tokens.len() - NUM_SPECIALS
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn content_tokens(&self) -> &[String] {
        &self.tokens[NUM_SPECIALS..]
    }

    pub fn is_special(id: TokenId) -> bool {
        (id as usize) < NUM_SPECIALS
    }

    /// Stable content hash, embedded in checkpoints to detect mismatched
    /// vocabulary at load time.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Lowercase and split on whitespace/punctuation (punctuation is a
/// separator, not a token). No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

/// Frequency-thresholded vocabulary over the reference sentences of
/// `records`. Tokens with count ≥ `min_count` receive ids (alphabetical
/// order); everything else maps to UNK.
pub fn build_vocabulary(
    records: &[VideoRecord],
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for video in records {
        for clip in &video.clips {
            for sentence in &clip.refs {
                for token in tokenize(sentence) {
                    *counts.entry(token).or_insert(0) += 1;
                }
            }
        }
    }
    let content = counts.into_iter().filter(|(_, c)| *c >= min_count).map(|(t, _)| t);
    Ok(Vocabulary::from_tokens(content))
}

/// Tokenize, truncate to [`MAX_SENTENCE_TOKENS`] content tokens, wrap in
/// BOS…EOS. Empty text encodes to `[BOS, EOS]`.
pub fn encode_sentence(vocab: &Vocabulary, text: &str) -> Vec<TokenId> {
    let mut ids = vec![BOS];
    for token in tokenize(text).into_iter().take(MAX_SENTENCE_TOKENS) {
        ids.push(vocab.id(&token));
    }
    ids.push(EOS);
    ids
}

/// Space-joined surface form; special ids are skipped.
pub fn detokenize(vocab: &Vocabulary, ids: &[TokenId]) -> String {
    let words: Vec<&str> =
        ids.iter().filter(|id| !Vocabulary::is_special(**id)).map(|id| vocab.token(*id)).collect();
    words.join(" ")
}

/// Binary presence vector over the content vocabulary: entry 1 iff the token
/// occurs (multiplicity ignored, specials excluded).
pub fn bow_vector(vocab: &Vocabulary, ids: &[TokenId]) -> Vec<f64> {
    let mut bow = vec![0.0; vocab.content_size()];
    for &id in ids {
        if !Vocabulary::is_special(id) {
            bow[id as usize - NUM_SPECIALS] = 1.0;
        }
    }
    bow
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::{Clip, VideoRecord};

    fn record_with_refs(refs: &[(&str, &str)]) -> VideoRecord {
        VideoRecord {
            video_id: "v00000".to_string(),
            activity_id: 0,
            clips: refs
                .iter()
                .map(|(a, b)| Clip {
                    features: crate::corpus::types::ClipFeatures::zeros(4, 4, 6),
                    refs: [a.to_string(), b.to_string()],
                    latent: None,
                })
                .collect(),
        }
    }

    #[test]
    fn encode_simple_sentence() {
        let vocab = Vocabulary::from_tokens(["a", "man", "runs"]);
        let ids = encode_sentence(&vocab, "A man runs.");
        assert_eq!(ids[0], BOS);
        assert_eq!(*ids.last().unwrap(), EOS);
        assert_eq!(ids.len(), 5);
        assert_eq!(detokenize(&vocab, &ids), "a man runs");
    }

    #[test]
    fn encode_caps_at_thirty_content_tokens() {
        let words: Vec<String> = (0..35).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::from_tokens(words.clone());
        let ids = encode_sentence(&vocab, &words.join(" "));
        assert_eq!(ids.len(), 32); // BOS + 30 + EOS
    }

    #[test]
    fn oov_maps_to_unk() {
        let vocab = Vocabulary::from_tokens(["a"]);
        let ids = encode_sentence(&vocab, "xyzzy");
        assert_eq!(ids, vec![BOS, UNK, EOS]);
    }

    #[test]
    fn empty_text_is_bos_eos() {
        let vocab = Vocabulary::from_tokens(["a"]);
        assert_eq!(encode_sentence(&vocab, ""), vec![BOS, EOS]);
        assert_eq!(encode_sentence(&vocab, " .,! "), vec![BOS, EOS]);
    }

    #[test]
    fn build_vocabulary_applies_min_count() {
        let rec = record_with_refs(&[
            ("man man man man man", "dog runs"),
            ("man dog", "man cat"),
        ]);
        // counts: man 7, dog 2, runs 1, cat 1
        let vocab = build_vocabulary(&[rec], 2).unwrap();
        assert!(vocab.contains("man"));
        assert!(vocab.contains("dog"));
        assert!(!vocab.contains("runs"));
        assert!(!vocab.contains("cat"));
    }

    #[test]
    fn min_count_boundary_token_is_included() {
        // "seen" appears exactly 3 times across a hand-built 3-sentence corpus.
        let rec = record_with_refs(&[("a man is seen", "seen again here"), ("seen once more", "x y")]);
        let vocab = build_vocabulary(&[rec], 3).unwrap();
        assert!(vocab.contains("seen"));
        assert!(!vocab.contains("man"));
    }

    #[test]
    fn min_count_above_all_frequencies_leaves_specials_only() {
        let rec = record_with_refs(&[("a b", "c d")]);
        let vocab = build_vocabulary(&[rec], 99).unwrap();
        assert_eq!(vocab.size(), NUM_SPECIALS);
        assert_eq!(vocab.content_size(), 0);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(build_vocabulary(&[], 1).is_err());
    }

    #[test]
    fn bow_is_binary_and_excludes_specials() {
        let vocab = Vocabulary::from_tokens(["a", "man", "runs", "dog"]);
        let ids = encode_sentence(&vocab, "a man runs");
        assert_eq!(bow_vector(&vocab, &ids), vec![1.0, 1.0, 1.0, 0.0]);
        let ids = encode_sentence(&vocab, "a a man");
        assert_eq!(bow_vector(&vocab, &ids), vec![1.0, 1.0, 0.0, 0.0]);
        let ids = encode_sentence(&vocab, "");
        assert_eq!(bow_vector(&vocab, &ids), vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_for_in_vocab_sentence() {
        let vocab = Vocabulary::from_tokens(["the", "kids", "play", "outside"]);
        let s = "The kids play outside!";
        let normalized = tokenize(s).join(" ");
        assert_eq!(detokenize(&vocab, &encode_sentence(&vocab, s)), normalized);
    }

    #[test]
    fn vocab_hash_changes_with_content() {
        let a = Vocabulary::from_tokens(["x", "y"]);
        let b = Vocabulary::from_tokens(["x", "z"]);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), Vocabulary::from_tokens(["x", "y"]).hash());
    }
}
