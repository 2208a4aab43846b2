//! Corpus value types: clip features, video records, the bundle and its
//! generation spec.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use super::CorpusError;
use crate::substrate::Tensor;

/// Fixed temporal layout of every clip's features.
pub const MOTION_SEGMENTS: usize = 10;
pub const APPEARANCE_SEGMENTS: usize = 10;
pub const OBJECT_SEGMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub motion: usize,
    pub appearance: usize,
    pub objects: usize,
}

impl Default for FeatureDims {
    fn default() -> Self {
        Self { motion: 64, appearance: 64, objects: 100 }
    }
}

/// Per-clip features: 10 motion segments, 10 appearance segments and a
/// 3-segment weighted object bag with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    pub motion: Arc<Tensor>,
    pub appearance: Arc<Tensor>,
    pub objects: Arc<Tensor>,
}

impl ClipFeatures {
    pub fn new(motion: Tensor, appearance: Tensor, objects: Tensor) -> Result<Self, CorpusError> {
        let check = |t: &Tensor, rows: usize, name: &str| -> Result<(), CorpusError> {
            if t.shape().len() != 2 || t.rows() != rows {
                return Err(CorpusError::InvalidFeatures {
                    detail: format!("{name} must have {rows} rows, got shape {:?}", t.shape()),
                });
            }
            if !t.is_finite() {
                return Err(CorpusError::InvalidFeatures {
                    detail: format!("{name} contains non-finite values"),
                });
            }
            Ok(())
        };
        check(&motion, MOTION_SEGMENTS, "motion")?;
        check(&appearance, APPEARANCE_SEGMENTS, "appearance")?;
        check(&objects, OBJECT_SEGMENTS, "objects")?;
        if objects.data().iter().any(|v| *v < 0.0 || *v > 1.0) {
            return Err(CorpusError::InvalidFeatures {
                detail: "object weights must lie in [0, 1]".to_string(),
            });
        }
        Ok(Self {
            motion: Arc::new(motion),
            appearance: Arc::new(appearance),
            objects: Arc::new(objects),
        })
    }

    pub fn zeros(motion_dim: usize, appearance_dim: usize, object_dim: usize) -> Self {
        Self {
            motion: Arc::new(Tensor::zeros(&[MOTION_SEGMENTS, motion_dim])),
            appearance: Arc::new(Tensor::zeros(&[APPEARANCE_SEGMENTS, appearance_dim])),
            objects: Arc::new(Tensor::zeros(&[OBJECT_SEGMENTS, object_dim])),
        }
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            motion: self.motion.cols(),
            appearance: self.appearance.cols(),
            objects: self.objects.cols(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plurality {
    Single,
    Plural,
}

/// Ground truth behind a synthetic clip; absent for imported corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipLatent {
    pub event: u32,
    pub gender: Gender,
    pub plurality: Plurality,
    pub objects: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub features: ClipFeatures,
    pub refs: [String; 2],
    pub latent: Option<ClipLatent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub activity_id: u32,
    pub clips: Vec<Clip>,
}

/// Generation spec for the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub num_videos: usize,
    pub clip_range: (usize, usize),
    pub num_events: usize,
    pub num_activities: usize,
    pub noise_sigma: f64,
    #[serde(default)]
    pub feature_dims: FeatureDims,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |detail: String| Err(CorpusError::InvalidSpec { detail });
        if self.num_videos == 0 {
            return fail("num_videos must be positive".into());
        }
        let (lo, hi) = self.clip_range;
        if lo < 1 || hi > 8 || lo > hi {
            return fail(format!("clip_range {:?} must satisfy 1 <= lo <= hi <= 8", self.clip_range));
        }
        if self.num_activities == 0 || self.num_events == 0 {
            return fail("num_events and num_activities must be positive".into());
        }
        if self.num_events % self.num_activities != 0 {
            return fail(format!(
                "num_events ({}) must divide evenly into num_activities ({}) groups",
                self.num_events, self.num_activities
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return fail(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if self.feature_dims.motion == 0 || self.feature_dims.appearance == 0 {
            return fail("feature dims must be positive".into());
        }
        if self.feature_dims.objects < 8 {
            return fail("object vocabulary must have at least 8 entries".into());
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_videos: 60,
            clip_range: (2, 4),
            num_events: 20,
            num_activities: 5,
            noise_sigma: 0.1,
            feature_dims: FeatureDims::default(),
        }
    }
}

/// Train/val/test split as indices into `videos` (disjoint by construction).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// A complete corpus: videos, the train-split vocabulary, the generation
/// spec and seed, and the split assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBundle {
    pub spec: CorpusSpec,
    pub seed: u64,
    pub vocab: Vocabulary,
    pub videos: Vec<VideoRecord>,
    pub splits: Splits,
}

impl CorpusBundle {
    pub fn split_videos(&self, split: Split) -> Vec<&VideoRecord> {
        let idx = match split {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        };
        idx.iter().map(|&i| &self.videos[i]).collect()
    }

    pub fn video_by_id(&self, id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.video_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::InvalidSpec { detail: format!("unknown split {other:?}") }),
        }
    }
}
