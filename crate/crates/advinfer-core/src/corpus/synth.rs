//! Synthetic multimodal corpus generation.
//!
//! Every video draws an activity and an actor class; every clip draws an
//! event from the activity's event group. Motion rows are the event centroid
//! plus Gaussian noise, appearance rows are the actor-class centroid plus
//! noise, and the object bag carries indicator weights over the event's
//! object ids. Two templated references realize (actor, verb, object,
//! modifier) per clip, with pronoun chains across sentences and a common
//! camera-address coda on a majority of clips — the corpus-wide generic
//! phrase that maximum-likelihood decoding gravitates to.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::types::{
    Clip, ClipFeatures, ClipLatent, CorpusBundle, CorpusSpec, Gender, Plurality, Splits,
    VideoRecord, APPEARANCE_SEGMENTS, MOTION_SEGMENTS, OBJECT_SEGMENTS,
};
use super::vocab::build_vocabulary;
use super::CorpusError;
use crate::substrate::{derive_seed, rng_from, Tensor};

const TAG_LEXICON: u64 = 1;
const TAG_VIDEO: u64 = 2;
const TAG_SPLIT: u64 = 3;

/// Probability that a clip's references carry the generic coda.
const CODA_PROB: f64 = 0.65;
/// Probability that a reference carries an adverbial modifier.
const ADVERBIAL_PROB: f64 = 0.4;

/// (singular, plural, synonym-singular, synonym-plural)
const VERBS: [(&str, &str, &str, &str); 24] = [
    ("lifts", "lift", "raises", "raise"),
    ("carries", "carry", "moves", "move"),
    ("opens", "open", "unlocks", "unlock"),
    ("closes", "close", "shuts", "shut"),
    ("throws", "throw", "tosses", "toss"),
    ("catches", "catch", "grabs", "grab"),
    ("pushes", "push", "shoves", "shove"),
    ("pulls", "pull", "drags", "drag"),
    ("holds", "hold", "grips", "grip"),
    ("drops", "drop", "releases", "release"),
    ("cleans", "clean", "wipes", "wipe"),
    ("washes", "wash", "rinses", "rinse"),
    ("paints", "paint", "colors", "color"),
    ("cuts", "cut", "slices", "slice"),
    ("folds", "fold", "bends", "bend"),
    ("stacks", "stack", "piles", "pile"),
    ("spins", "spin", "twirls", "twirl"),
    ("kicks", "kick", "strikes", "strike"),
    ("rolls", "roll", "turns", "turn"),
    ("shakes", "shake", "rattles", "rattle"),
    ("taps", "tap", "touches", "touch"),
    ("swings", "swing", "waves", "wave"),
    ("flips", "flip", "tilts", "tilt"),
    ("polishes", "polish", "shines", "shine"),
];

const ADVERBIALS: [&str; 8] =
    ["slowly", "quickly", "carefully", "gently", "outside", "indoors", "again", "twice"];

const OBJECT_WORDS: [&str; 100] = [
    "chair", "table", "ball", "rope", "box", "bike", "guitar", "piano", "drum", "broom",
    "bucket", "ladder", "towel", "plate", "bowl", "knife", "spoon", "bottle", "cup", "phone",
    "camera", "laptop", "book", "paper", "pen", "brush", "comb", "mirror", "hat", "coat",
    "scarf", "glove", "shoe", "sock", "shirt", "dress", "belt", "bag", "basket", "net",
    "racket", "bat", "stick", "club", "helmet", "saddle", "sled", "board", "skate", "ski",
    "pole", "tent", "rug", "lamp", "candle", "torch", "shovel", "rake", "hoe", "axe",
    "hammer", "nail", "screw", "wrench", "drill", "saw", "tape", "glue", "string", "wire",
    "chain", "lock", "key", "door", "window", "curtain", "pillow", "blanket", "mattress",
    "couch", "bench", "stool", "desk", "shelf", "cabinet", "drawer", "sink", "soap", "sponge",
    "mop", "pan", "pot", "kettle", "toaster", "oven", "grill", "fence", "gate", "wall",
    "roof",
];

/// Actor noun sets indexed by class; class = gender × plurality.
const ACTOR_CLASSES: [(Gender, Plurality, [&str; 3]); 6] = [
    (Gender::Male, Plurality::Single, ["man", "boy", "guy"]),
    (Gender::Female, Plurality::Single, ["woman", "girl", "lady"]),
    (Gender::Neutral, Plurality::Single, ["person", "child", "kid"]),
    (Gender::Male, Plurality::Plural, ["men", "boys", "guys"]),
    (Gender::Female, Plurality::Plural, ["women", "girls", "ladies"]),
    (Gender::Neutral, Plurality::Plural, ["people", "children", "kids"]),
];

fn pronoun(gender: Gender, plurality: Plurality) -> Option<&'static str> {
    match (gender, plurality) {
        (_, Plurality::Plural) => Some("they"),
        (Gender::Male, Plurality::Single) => Some("he"),
        (Gender::Female, Plurality::Single) => Some("she"),
        (Gender::Neutral, Plurality::Single) => None,
    }
}

fn object_word(id: u32) -> String {
    OBJECT_WORDS.get(id as usize).map(|w| w.to_string()).unwrap_or_else(|| format!("item{id}"))
}

/// Deterministic per-corpus lexicon: event→verb and event→objects maps plus
/// the latent feature centroids. A pure function of (spec, seed); tests use
/// it as the exhaustive nearest-centroid oracle.
#[derive(Debug, Clone)]
pub struct SynthLexicon {
    pub event_verbs: Vec<usize>,
    pub event_objects: Vec<[u32; 2]>,
    pub motion_centroids: Vec<Vec<f64>>,
    pub actor_centroids: Vec<Vec<f64>>,
}

impl SynthLexicon {
    pub fn build(spec: &CorpusSpec, seed: u64) -> Self {
        let mut rng = rng_from(derive_seed(seed, &[TAG_LEXICON]));
        let mut verb_order: Vec<usize> = (0..VERBS.len()).collect();
        // Fisher–Yates with the corpus stream.
        for i in (1..verb_order.len()).rev() {
            let j = rng.gen_range(0..=i);
            verb_order.swap(i, j);
        }
        let event_verbs: Vec<usize> =
            (0..spec.num_events).map(|e| verb_order[e % verb_order.len()]).collect();
        let v_o = spec.feature_dims.objects as u32;
        let event_objects: Vec<[u32; 2]> = (0..spec.num_events)
            .map(|_| {
                let a = rng.gen_range(0..v_o);
                let mut b = rng.gen_range(0..v_o);
                while b == a {
                    b = rng.gen_range(0..v_o);
                }
                [a, b]
            })
            .collect();
        let motion_centroids = (0..spec.num_events)
            .map(|_| gaussian_vec(&mut rng, spec.feature_dims.motion, 1.0))
            .collect();
        let actor_centroids = (0..ACTOR_CLASSES.len())
            .map(|_| gaussian_vec(&mut rng, spec.feature_dims.appearance, 1.0))
            .collect();
        Self { event_verbs, event_objects, motion_centroids, actor_centroids }
    }

    /// Tokens a reference for `event` can draw its content words from.
    pub fn event_lexicon(&self, event: usize) -> Vec<String> {
        let (sg, pl, syn_sg, syn_pl) = VERBS[self.event_verbs[event]];
        let mut words: Vec<String> =
            [sg, pl, syn_sg, syn_pl].iter().map(|w| w.to_string()).collect();
        for oid in self.event_objects[event] {
            words.push(object_word(oid));
        }
        words
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect()
}

/// Round to 9 significant digits — the corpus file's float precision — so an
/// in-memory bundle round-trips through serialization bit-exactly.
pub fn quantize9(v: f64) -> f64 {
    format!("{v:.8e}").parse().expect("formatted float reparses")
}

fn noisy_rows(
    rng: &mut ChaCha8Rng,
    centroid: &[f64],
    rows: usize,
    sigma: f64,
) -> Result<Tensor, CorpusError> {
    let dim = centroid.len();
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        for &c in centroid {
            let noise: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            data.push(quantize9(c + sigma * noise));
        }
    }
    Ok(Tensor::matrix(rows, dim, data)?)
}

struct VideoDraw<'a> {
    lexicon: &'a SynthLexicon,
    gender: Gender,
    plurality: Plurality,
    noun: &'static str,
}

impl VideoDraw<'_> {
    fn verb_forms(&self, event: usize) -> (&'static str, &'static str) {
        let (sg, pl, syn_sg, syn_pl) = VERBS[self.lexicon.event_verbs[event]];
        match self.plurality {
            Plurality::Single => (sg, syn_sg),
            Plurality::Plural => (pl, syn_pl),
        }
    }

    fn realize(
        &self,
        rng: &mut ChaCha8Rng,
        event: usize,
        clip_index: usize,
        coda: bool,
    ) -> [String; 2] {
        let (verb, synonym) = self.verb_forms(event);
        let [obj_a, obj_b] = self.lexicon.event_objects[event];
        let coda_verb = match self.plurality {
            Plurality::Single => "speaks",
            Plurality::Plural => "speak",
        };

        // Both references share the subject realization (pronoun chain after
        // the first clip), so the per-video person-word multiset is the same
        // in each track; they differ in verb, object, determiner and modifier.
        let pronoun_subject = pronoun(self.gender, self.plurality).map(|p| p.to_string());
        let subject = |det: &str| {
            if clip_index == 0 {
                format!("{det} {}", self.noun)
            } else {
                pronoun_subject.clone().unwrap_or_else(|| format!("the {}", self.noun))
            }
        };
        let mut first = format!("{} {verb} the {}", subject("a"), object_word(obj_a));
        if rng.gen::<f64>() < ADVERBIAL_PROB {
            first.push(' ');
            first.push_str(ADVERBIALS[rng.gen_range(0..ADVERBIALS.len())]);
        }
        if coda {
            first.push_str(&format!(" and {coda_verb} to the camera"));
        }

        // Paraphrase track: synonym verb and the event's other object.
        let mut second = format!("{} {synonym} a {}", subject("the"), object_word(obj_b));
        if rng.gen::<f64>() < ADVERBIAL_PROB {
            second.push(' ');
            second.push_str(ADVERBIALS[rng.gen_range(0..ADVERBIALS.len())]);
        }
        if coda {
            second.push_str(&format!(" and {coda_verb} to the camera"));
        }
        [first, second]
    }
}

/// Deterministic synthetic corpus for a (spec, seed) pair.
pub fn gen_synthetic_corpus(spec: &CorpusSpec, seed: u64) -> Result<CorpusBundle, CorpusError> {
    spec.validate()?;
    let lexicon = SynthLexicon::build(spec, seed);
    let group_size = spec.num_events / spec.num_activities;

    let mut videos = Vec::with_capacity(spec.num_videos);
    for v in 0..spec.num_videos {
        let mut rng = rng_from(derive_seed(seed, &[TAG_VIDEO, v as u64]));
        let activity = rng.gen_range(0..spec.num_activities) as u32;
        let class = rng.gen_range(0..ACTOR_CLASSES.len());
        let (gender, plurality, nouns) = ACTOR_CLASSES[class];
        let noun = nouns[rng.gen_range(0..nouns.len())];
        let draw = VideoDraw { lexicon: &lexicon, gender, plurality, noun };
        let clip_count = rng.gen_range(spec.clip_range.0..=spec.clip_range.1);
        let mut clips = Vec::with_capacity(clip_count);
        for i in 0..clip_count {
            let event =
                (activity as usize * group_size) + rng.gen_range(0..group_size);
            let coda = rng.gen::<f64>() < CODA_PROB;
            let motion = noisy_rows(
                &mut rng,
                &lexicon.motion_centroids[event],
                MOTION_SEGMENTS,
                spec.noise_sigma,
            )?;
            let appearance = noisy_rows(
                &mut rng,
                &lexicon.actor_centroids[class],
                APPEARANCE_SEGMENTS,
                spec.noise_sigma,
            )?;
            let mut bag = vec![0.0; OBJECT_SEGMENTS * spec.feature_dims.objects];
            for row in 0..OBJECT_SEGMENTS {
                for &oid in &lexicon.event_objects[event] {
                    let noise: f64 =
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    let w = (1.0 - spec.noise_sigma * noise.abs()).clamp(0.0, 1.0);
                    bag[row * spec.feature_dims.objects + oid as usize] = quantize9(w);
                }
            }
            let objects =
                Tensor::matrix(OBJECT_SEGMENTS, spec.feature_dims.objects, bag)?;
            let refs = draw.realize(&mut rng, event, i, coda);
            clips.push(Clip {
                features: ClipFeatures::new(motion, appearance, objects)?,
                refs,
                latent: Some(ClipLatent {
                    event: event as u32,
                    gender,
                    plurality,
                    objects: lexicon.event_objects[event].to_vec(),
                }),
            });
        }
        videos.push(VideoRecord { video_id: format!("v{v:05}"), activity_id: activity, clips });
    }

    let splits = assign_splits(spec.num_videos, seed);
    let train_records: Vec<VideoRecord> =
        splits.train.iter().map(|&i| videos[i].clone()).collect();
    let vocab = build_vocabulary(&train_records, 1)?;
    Ok(CorpusBundle { spec: spec.clone(), seed, vocab, videos, splits })
}

/// Seeded 70/15/15 split by video index. Recomputed at load time, so the
/// corpus file itself does not carry split membership.
pub fn assign_splits(num_videos: usize, seed: u64) -> Splits {
    let mut order: Vec<usize> = (0..num_videos).collect();
    let mut rng = rng_from(derive_seed(seed, &[TAG_SPLIT]));
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = num_videos * 70 / 100;
    let n_val = num_videos * 15 / 100;
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::tokenize;
    use std::collections::HashSet;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            num_videos: 10,
            clip_range: (2, 4),
            num_events: 8,
            num_activities: 4,
            noise_sigma: 0.1,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn shape_contract_holds() {
        let bundle = gen_synthetic_corpus(&small_spec(), 7).unwrap();
        assert_eq!(bundle.videos.len(), 10);
        for video in &bundle.videos {
            assert!((2..=4).contains(&video.clips.len()));
            for clip in &video.clips {
                assert_eq!(clip.features.motion.rows(), 10);
                assert_eq!(clip.features.appearance.rows(), 10);
                assert_eq!(clip.features.objects.rows(), 3);
                assert_eq!(clip.refs.len(), 2);
                assert!(clip.latent.is_some());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic_corpus(&small_spec(), 7).unwrap();
        let b = gen_synthetic_corpus(&small_spec(), 7).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic_corpus(&small_spec(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut spec = small_spec();
        spec.num_events = 9; // not divisible by 4 activities
        assert!(gen_synthetic_corpus(&spec, 7).is_err());
    }

    #[test]
    fn nearest_centroid_recovers_events_and_actors() {
        let spec = CorpusSpec { num_videos: 40, ..small_spec() };
        let bundle = gen_synthetic_corpus(&spec, 11).unwrap();
        let lexicon = SynthLexicon::build(&spec, 11);
        let mut motion_hits = 0usize;
        let mut actor_hits = 0usize;
        let mut total = 0usize;
        for video in &bundle.videos {
            for clip in &video.clips {
                let latent = clip.latent.as_ref().unwrap();
                total += 1;
                // Mean motion row, exhaustive nearest centroid over all events.
                let dim = clip.features.motion.cols();
                let mut mean = vec![0.0; dim];
                for r in 0..clip.features.motion.rows() {
                    for (m, v) in mean.iter_mut().zip(clip.features.motion.row(r)) {
                        *m += v / clip.features.motion.rows() as f64;
                    }
                }
                let best = nearest(&mean, &lexicon.motion_centroids);
                if best == latent.event as usize {
                    motion_hits += 1;
                }
                let dim = clip.features.appearance.cols();
                let mut mean = vec![0.0; dim];
                for r in 0..clip.features.appearance.rows() {
                    for (m, v) in mean.iter_mut().zip(clip.features.appearance.row(r)) {
                        *m += v / clip.features.appearance.rows() as f64;
                    }
                }
                let class = nearest(&mean, &lexicon.actor_centroids);
                let (g, p, _) = ACTOR_CLASSES[class];
                if g == latent.gender && p == latent.plurality {
                    actor_hits += 1;
                }
            }
        }
        assert!(motion_hits as f64 / total as f64 >= 0.95, "{motion_hits}/{total}");
        assert!(actor_hits as f64 / total as f64 >= 0.95, "{actor_hits}/{total}");
    }

    fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in centroids.iter().enumerate() {
            let d: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    #[test]
    fn references_draw_from_event_lexicon() {
        let bundle = gen_synthetic_corpus(&small_spec(), 5).unwrap();
        let lexicon = SynthLexicon::build(&small_spec(), 5);
        for video in &bundle.videos {
            for clip in &video.clips {
                let event = clip.latent.as_ref().unwrap().event as usize;
                let words: HashSet<String> = lexicon.event_lexicon(event).into_iter().collect();
                for r in &clip.refs {
                    let tokens: HashSet<String> = tokenize(r).into_iter().collect();
                    assert!(
                        tokens.intersection(&words).next().is_some(),
                        "reference {r:?} shares no token with event lexicon {words:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn references_respect_the_word_cap_and_differ() {
        let bundle = gen_synthetic_corpus(&small_spec(), 5).unwrap();
        for video in &bundle.videos {
            for clip in &video.clips {
                assert!(tokenize(&clip.refs[0]).len() <= 30);
                assert!(tokenize(&clip.refs[1]).len() <= 30);
                assert_ne!(clip.refs[0], clip.refs[1]);
            }
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let spec = CorpusSpec { num_videos: 20, ..small_spec() };
        let bundle = gen_synthetic_corpus(&spec, 3).unwrap();
        let mut seen = HashSet::new();
        for idx in bundle
            .splits
            .train
            .iter()
            .chain(&bundle.splits.val)
            .chain(&bundle.splits.test)
        {
            assert!(seen.insert(*idx), "index {idx} appears in two splits");
        }
        assert_eq!(seen.len(), 20);
        assert_eq!(bundle.splits.train.len(), 14);
        assert_eq!(bundle.splits.val.len(), 3);
        assert_eq!(bundle.splits.test.len(), 3);
    }

    #[test]
    fn vocabulary_comes_from_train_split_only() {
        // Make one actor noun appear only outside the train split by
        // checking the property structurally: every vocab token occurs in
        // some train reference.
        let bundle = gen_synthetic_corpus(&small_spec(), 9).unwrap();
        let mut train_tokens = HashSet::new();
        for &i in &bundle.splits.train {
            for clip in &bundle.videos[i].clips {
                for r in &clip.refs {
                    train_tokens.extend(tokenize(r));
                }
            }
        }
        for token in bundle.vocab.content_tokens() {
            assert!(train_tokens.contains(token), "vocab token {token} not in train split");
        }
    }
}
