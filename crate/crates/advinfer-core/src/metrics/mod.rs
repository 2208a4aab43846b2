//! Paragraph-level evaluation: BLEU@4, CIDEr-D, Div-1/2, RE-4 (per video and
//! per activity), corpus statistics and person-word F1.

pub mod bleu;
pub mod cider;
pub mod ngram;
pub mod person;

pub use bleu::bleu4;
pub use cider::{cider_d, CiderStats};
pub use ngram::{div_n, div_n_stream, re4_per_activity, re_n, re_n_stream};
pub use person::{person_f1, PersonItem, PersonLexicon, PersonMode};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, VideoRecord};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("missing corpus statistics: {detail}")]
    MissingCorpusStats { detail: String },
    #[error("person lexicon error: {detail}")]
    Lexicon { detail: String },
    #[error("prediction/reference id mismatch: {detail}")]
    IdMismatch { detail: String },
}

/// Surface-form predictions keyed by video id; one sentence per clip.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Predictions {
    pub by_video: BTreeMap<String, Vec<String>>,
}

impl Predictions {
    pub fn insert(&mut self, video_id: impl Into<String>, sentences: Vec<String>) {
        self.by_video.insert(video_id.into(), sentences);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub bleu4: f64,
    pub cider_d: f64,
    pub div1: f64,
    pub div2: f64,
    pub re4: f64,
}

/// Mirror of the evaluation table: per-video rows plus corpus aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_video: Vec<VideoMetrics>,
    pub mean_bleu4: f64,
    pub mean_cider_d: f64,
    pub mean_div1: f64,
    pub mean_div2: f64,
    pub mean_re4: f64,
    pub re4_per_activity: f64,
    pub vocab_size: usize,
    pub mean_sentence_length: f64,
    pub person_f1_exact: f64,
    pub person_f1_gender_plurality: f64,
}

/// Reference paragraphs of a video: one token stream per reference track
/// (each clip contributes its r-th reference to track r).
fn reference_streams(video: &VideoRecord) -> Vec<Vec<String>> {
    let mut tracks = vec![Vec::new(), Vec::new()];
    for clip in &video.clips {
        for (r, track) in tracks.iter_mut().enumerate() {
            track.extend(tokenize(&clip.refs[r]));
        }
    }
    tracks
}

/// Paragraph-level evaluation of `predictions` against the references of
/// `videos`. BLEU/CIDEr-D see the concatenated paragraph stream; Div/RE
/// count n-grams within sentences.
pub fn evaluate_corpus(
    predictions: &Predictions,
    videos: &[&VideoRecord],
    lexicon: &PersonLexicon,
) -> Result<MetricsReport, MetricsError> {
    for video in videos {
        if !predictions.by_video.contains_key(&video.video_id) {
            return Err(MetricsError::IdMismatch {
                detail: format!("no prediction for video {}", video.video_id),
            });
        }
    }
    let known: BTreeMap<&str, &&VideoRecord> =
        videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    for id in predictions.by_video.keys() {
        if !known.contains_key(id.as_str()) {
            return Err(MetricsError::IdMismatch {
                detail: format!("prediction for unknown video {id}"),
            });
        }
    }

    let all_refs: Vec<Vec<Vec<String>>> = videos.iter().map(|v| reference_streams(v)).collect();
    let stats = CiderStats::from_references(&all_refs)?;

    let mut per_video = Vec::with_capacity(videos.len());
    let mut activity_groups: BTreeMap<u32, Vec<Vec<String>>> = BTreeMap::new();
    let mut vocab: BTreeMap<String, ()> = BTreeMap::new();
    let mut total_tokens = 0usize;
    let mut total_sentences = 0usize;
    let mut flat_preds: Vec<Vec<String>> = Vec::with_capacity(videos.len());

    for (video, refs) in videos.iter().zip(&all_refs) {
        let sentences: Vec<Vec<String>> = predictions.by_video[&video.video_id]
            .iter()
            .map(|s| tokenize(s))
            .collect();
        let flat: Vec<String> = sentences.iter().flatten().cloned().collect();
        for t in &flat {
            vocab.insert(t.clone(), ());
        }
        total_tokens += flat.len();
        total_sentences += sentences.len();
        activity_groups.entry(video.activity_id).or_default().extend(sentences.clone());

        per_video.push(VideoMetrics {
            video_id: video.video_id.clone(),
            bleu4: bleu4(&flat, refs),
            cider_d: cider_d(&flat, refs, &stats)?,
            div1: div_n(&sentences, 1),
            div2: div_n(&sentences, 2),
            re4: re_n(&sentences, 4),
        });
        flat_preds.push(flat);
    }

    let n = per_video.len().max(1) as f64;
    let mean = |f: fn(&VideoMetrics) -> f64| per_video.iter().map(f).sum::<f64>() / n;

    let items: Vec<PersonItem<'_, String>> = flat_preds
        .iter()
        .zip(&all_refs)
        .map(|(pred, refs)| PersonItem { prediction: pred.as_slice(), references: refs.as_slice() })
        .collect();

    Ok(MetricsReport {
        mean_bleu4: mean(|v| v.bleu4),
        mean_cider_d: mean(|v| v.cider_d),
        mean_div1: mean(|v| v.div1),
        mean_div2: mean(|v| v.div2),
        mean_re4: mean(|v| v.re4),
        re4_per_activity: re4_per_activity(&activity_groups),
        vocab_size: vocab.len(),
        mean_sentence_length: if total_sentences == 0 {
            0.0
        } else {
            total_tokens as f64 / total_sentences as f64
        },
        person_f1_exact: person_f1(&items, lexicon, PersonMode::ExactWord),
        person_f1_gender_plurality: person_f1(&items, lexicon, PersonMode::GenderPlurality),
        per_video,
    })
}
