//! Corpus (de)serialization.
//!
//! A corpus is a single JSON document `{version, spec, vocab, videos}` with
//! floats written at 9 significant digits. Split membership is not stored;
//! it is a deterministic function of (seed, video count) and is recomputed on
//! load. Imported corpora use the same shape with `latent` omitted.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::assign_splits;
use super::types::{
    Clip, ClipFeatures, ClipLatent, CorpusBundle, CorpusSpec, VideoRecord, APPEARANCE_SEGMENTS,
    MOTION_SEGMENTS, OBJECT_SEGMENTS,
};
use super::vocab::{Vocabulary, SPECIAL_TOKENS};
use super::CorpusError;
use crate::substrate::Tensor;

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    version: u32,
    spec: FileSpec,
    vocab: FileVocab,
    videos: Vec<FileVideo>,
}

#[derive(Serialize, Deserialize)]
struct FileSpec {
    #[serde(flatten)]
    spec: CorpusSpec,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct FileVocab {
    specials: Vec<String>,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FileVideo {
    id: String,
    activity: u32,
    clips: Vec<FileClip>,
}

#[derive(Serialize, Deserialize)]
struct FileClip {
    motion: Vec<Vec<f64>>,
    appearance: Vec<Vec<f64>>,
    objects: Vec<Vec<f64>>,
    refs: [String; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    latent: Option<ClipLatent>,
}

/// Writes every JSON float as `{:.8e}` (9 significant digits).
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn tensor_of(rows: &[Vec<f64>], expect_rows: usize, name: &str) -> Result<Tensor, CorpusError> {
    if rows.len() != expect_rows {
        return Err(CorpusError::Format {
            detail: format!("{name}: expected {expect_rows} rows, got {}", rows.len()),
        });
    }
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(CorpusError::Format { detail: format!("{name}: ragged or empty rows") });
    }
    let data = rows.iter().flatten().copied().collect();
    Ok(Tensor::matrix(expect_rows, cols, data)?)
}

pub fn save_corpus<W: Write>(bundle: &CorpusBundle, writer: W) -> Result<(), CorpusError> {
    let file = CorpusFile {
        version: CORPUS_FORMAT_VERSION,
        spec: FileSpec { spec: bundle.spec.clone(), seed: bundle.seed },
        vocab: FileVocab {
            specials: SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect(),
            tokens: bundle.vocab.content_tokens().to_vec(),
        },
        videos: bundle
            .videos
            .iter()
            .map(|v| FileVideo {
                id: v.video_id.clone(),
                activity: v.activity_id,
                clips: v
                    .clips
                    .iter()
                    .map(|c| FileClip {
                        motion: rows_of(&c.features.motion),
                        appearance: rows_of(&c.features.appearance),
                        objects: rows_of(&c.features.objects),
                        refs: c.refs.clone(),
                        latent: c.latent.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut ser = serde_json::Serializer::with_formatter(writer, SigFigFormatter);
    file.serialize(&mut ser).map_err(|e| CorpusError::Format { detail: e.to_string() })
}

pub fn load_corpus<R: Read>(reader: R) -> Result<CorpusBundle, CorpusError> {
    let value: serde_json::Value = serde_json::from_reader(reader)
        .map_err(|e| CorpusError::Format { detail: e.to_string() })?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CorpusError::Format { detail: "missing version field".to_string() })?;
    if version != CORPUS_FORMAT_VERSION as u64 {
        return Err(CorpusError::Version { found: version, expected: CORPUS_FORMAT_VERSION });
    }
    let file: CorpusFile = serde_json::from_value(value)
        .map_err(|e| CorpusError::Format { detail: e.to_string() })?;

    if file.vocab.specials != SPECIAL_TOKENS {
        return Err(CorpusError::Format {
            detail: format!("unexpected special tokens {:?}", file.vocab.specials),
        });
    }
    let vocab = Vocabulary::from_tokens(file.vocab.tokens);
    if file.videos.len() != file.spec.spec.num_videos {
        return Err(CorpusError::Format {
            detail: format!(
                "spec says {} videos, file has {}",
                file.spec.spec.num_videos,
                file.videos.len()
            ),
        });
    }

    let mut videos = Vec::with_capacity(file.videos.len());
    for fv in file.videos {
        if fv.clips.is_empty() {
            return Err(CorpusError::Format {
                detail: format!("video {} has no clips", fv.id),
            });
        }
        let mut clips = Vec::with_capacity(fv.clips.len());
        for fc in fv.clips {
            let features = ClipFeatures::new(
                tensor_of(&fc.motion, MOTION_SEGMENTS, "motion")?,
                tensor_of(&fc.appearance, APPEARANCE_SEGMENTS, "appearance")?,
                tensor_of(&fc.objects, OBJECT_SEGMENTS, "objects")?,
            )?;
            clips.push(Clip { features, refs: fc.refs, latent: fc.latent });
        }
        videos.push(VideoRecord { video_id: fv.id, activity_id: fv.activity, clips });
    }

    let splits = assign_splits(videos.len(), file.spec.seed);
    Ok(CorpusBundle { spec: file.spec.spec, seed: file.spec.seed, vocab, videos, splits })
}

pub fn save_corpus_file(bundle: &CorpusBundle, path: &Path) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CorpusError::Format { detail: format!("{}: {e}", path.display()) })?;
    let mut buf = std::io::BufWriter::new(file);
    save_corpus(bundle, &mut buf)?;
    buf.flush().map_err(|e| CorpusError::Format { detail: e.to_string() })
}

pub fn load_corpus_file(path: &Path) -> Result<CorpusBundle, CorpusError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CorpusError::Format { detail: format!("{}: {e}", path.display()) })?;
    load_corpus(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::gen_synthetic_corpus;

    fn bundle() -> CorpusBundle {
        let spec = CorpusSpec {
            num_videos: 6,
            clip_range: (1, 3),
            num_events: 4,
            num_activities: 2,
            noise_sigma: 0.1,
            ..CorpusSpec::default()
        };
        gen_synthetic_corpus(&spec, 42).unwrap()
    }

    #[test]
    fn round_trip_is_structurally_equal() {
        let b = bundle();
        let mut bytes = Vec::new();
        save_corpus(&b, &mut bytes).unwrap();
        let loaded = load_corpus(bytes.as_slice()).unwrap();
        assert_eq!(b, loaded);
    }

    #[test]
    fn same_spec_and_seed_serialize_byte_identically() {
        let mut a = Vec::new();
        save_corpus(&bundle(), &mut a).unwrap();
        let mut b = Vec::new();
        save_corpus(&bundle(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_fails_with_format_error() {
        let mut bytes = Vec::new();
        save_corpus(&bundle(), &mut bytes).unwrap();
        bytes.truncate(bytes.len() / 2);
        match load_corpus(bytes.as_slice()) {
            Err(CorpusError::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn newer_version_header_is_a_version_error() {
        let mut bytes = Vec::new();
        save_corpus(&bundle(), &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let bumped = text.replacen("{\"version\":1", "{\"version\":2", 1);
        match load_corpus(bumped.as_bytes()) {
            Err(CorpusError::Version { found: 2, expected: 1 }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn import_mode_accepts_missing_latent() {
        let b = bundle();
        let mut bytes = Vec::new();
        save_corpus(&b, &mut bytes).unwrap();
        let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        for video in value["videos"].as_array_mut().unwrap() {
            for clip in video["clips"].as_array_mut().unwrap() {
                clip.as_object_mut().unwrap().remove("latent");
            }
        }
        let loaded = load_corpus(value.to_string().as_bytes()).unwrap();
        assert!(loaded.videos.iter().all(|v| v.clips.iter().all(|c| c.latent.is_none())));
        assert_eq!(loaded.splits, b.splits);
    }

    #[test]
    fn floats_have_nine_significant_digits() {
        let mut bytes = Vec::new();
        save_corpus(&bundle(), &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        // Every float in the document is in scientific notation with 8
        // decimal places.
        let some_float = text.split("\"motion\":[[").nth(1).unwrap();
        let first = some_float.split(&[',', ']'][..]).next().unwrap();
        assert!(first.contains('e'), "expected scientific notation, got {first}");
        let mantissa = first.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).map(|d| d.len()), Some(8), "{first}");
    }
}
