//! Synthetic corpora with class-conditional feature moments.
//!
//! Each user draws latent targets from its class distribution and the
//! targets are rendered into concrete artifacts: images whose naturalness
//! and colourfulness hit the targets, tweets whose category rates match,
//! reply edges, provider fixtures and profile text disclosing age and
//! gender. Every user has its own generator, so output is identical for a
//! given seed regardless of thread count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Gender, Label, ReplyEdge, Tweet, UserRecord};
use crate::error::{Error, Result};
use crate::imgfeat::{colorfulness, naturalness, PixelBuffer};
use crate::providers::{Emotions, Face, FixtureProvider, GenderEstimate, MemoryImageSource, ProviderResponse};
use crate::seed::{rng_for, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub mean: f64,
    pub sd: f64,
}

impl Moment {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Moment { mean, sd }
    }

    fn normal(&self) -> Result<Normal<f64>> {
        if !(self.mean.is_finite() && self.sd.is_finite() && self.sd >= 0.0) {
            return Err(Error::InvalidInput(format!("infeasible moment {self:?}")));
        }
        Normal::new(self.mean, self.sd).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.mean + self.sd * std_normal(rng)
    }
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
/// `n` independent normal draws from a stream keyed by `seed` and `index`.
pub fn draw_gaussian(m: Moment, n: usize, seed: u64, index: u64) -> Result<Vec<f64>> {
    let dist = m.normal()?;
    let mut rng = rng_for(seed, stream::SYNTH_DRAW, index);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMoments {
    pub profile_naturalness: Moment,
    pub shared_naturalness: Moment,
    pub profile_colorfulness: Moment,
    pub shared_colorfulness: Moment,
    /// Percent of tokens per lexicon category.
    pub text: BTreeMap<String, Moment>,
    /// Reply partners per user.
    pub reply_degree: Moment,
    pub reciprocity: f64,
    /// Means of lognormal social counts, in `UserRecord::social_counts` order.
    pub social_means: [f64; 6],
    pub social_log_sd: f64,
    pub profile_face_prob: f64,
    pub shared_face_prob: f64,
    pub joy: Moment,
    pub sadness: Moment,
    pub age: Moment,
    pub female_prob: f64,
    pub mangled_name_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_depressed: usize,
    pub n_control: usize,
    pub depressed: ClassMoments,
    pub control: ClassMoments,
    pub shared_images: (usize, usize),
    pub tweets_per_user: usize,
    pub tokens_per_tweet: usize,
    pub image_size: u32,
    pub collection_year: i32,
    pub age_disclosure_prob: f64,
    pub gender_disclosure_prob: f64,
    pub ocr_prob: f64,
}

fn text_moments(v: &[(&str, f64, f64)]) -> BTreeMap<String, Moment> {
    v.iter().map(|&(k, m, s)| (k.to_string(), Moment::new(m, s))).collect()
}

impl GeneratorSpec {
    /// Class-specific image and social means at fixed targets; spreads and
    /// the remaining modalities are chosen for a desk-scale corpus.
    pub fn calibrated(n_depressed: usize, n_control: usize) -> Self {
        GeneratorSpec {
            n_depressed,
            n_control,
            depressed: ClassMoments {
                profile_naturalness: Moment::new(0.3, 0.15),
                shared_naturalness: Moment::new(0.4, 0.12),
                profile_colorfulness: Moment::new(108.0, 15.0),
                shared_colorfulness: Moment::new(106.1, 12.0),
                text: text_moments(&[
                    ("self", 8.0, 2.0),
                    ("we", 0.6, 0.3),
                    ("you", 1.5, 0.6),
                    ("article", 4.0, 1.5),
                    ("negate", 2.5, 0.8),
                    ("cogn", 3.0, 1.0),
                    ("posemo", 2.5, 1.0),
                    ("negemo", 3.5, 1.2),
                    ("swear", 1.2, 0.6),
                    ("death", 1.0, 0.5),
                    ("work", 0.8, 0.4),
                    ("family", 1.0, 0.5),
                    ("friend", 0.6, 0.3),
                ]),
                reply_degree: Moment::new(3.0, 1.5),
                reciprocity: 0.4,
                social_means: [589.4, 610.1, 3722.0, 2021.0, 876.7, 0.2],
                social_log_sd: 0.8,
                profile_face_prob: 0.55,
                shared_face_prob: 0.25,
                joy: Moment::new(0.2, 0.08),
                sadness: Moment::new(0.35, 0.1),
                age: Moment::new(21.0, 6.0),
                female_prob: 0.6,
                mangled_name_prob: 0.3,
            },
            control: ClassMoments {
                profile_naturalness: Moment::new(0.6, 0.15),
                shared_naturalness: Moment::new(0.65, 0.12),
                profile_colorfulness: Moment::new(118.8, 15.0),
                shared_colorfulness: Moment::new(122.0, 12.0),
                text: text_moments(&[
                    ("self", 4.5, 2.0),
                    ("we", 1.2, 0.5),
                    ("you", 1.5, 0.6),
                    ("article", 6.0, 1.5),
                    ("negate", 1.5, 0.6),
                    ("cogn", 3.0, 1.0),
                    ("posemo", 4.0, 1.2),
                    ("negemo", 1.8, 1.0),
                    ("swear", 0.6, 0.4),
                    ("death", 0.3, 0.3),
                    ("work", 1.5, 0.6),
                    ("family", 1.0, 0.5),
                    ("friend", 1.0, 0.4),
                ]),
                reply_degree: Moment::new(6.0, 2.5),
                reciprocity: 0.7,
                social_means: [1340.0, 1380.0, 7766.0, 5199.0, 2720.0, 0.67],
                social_log_sd: 0.8,
                profile_face_prob: 0.7,
                shared_face_prob: 0.3,
                joy: Moment::new(0.45, 0.1),
                sadness: Moment::new(0.15, 0.08),
                age: Moment::new(30.0, 9.0),
                female_prob: 0.45,
                mangled_name_prob: 0.03,
            },
            shared_images: (2, 4),
            tweets_per_user: 20,
            tokens_per_tweet: 12,
            image_size: 32,
            collection_year: 2017,
            age_disclosure_prob: 0.6,
            gender_disclosure_prob: 0.6,
            ocr_prob: 0.3,
        }
    }

    /// `n` users split evenly, extra user to the control class.
    pub fn balanced(n: usize) -> Self {
        Self::calibrated(n / 2, n - n / 2)
    }

    fn validate(&self) -> Result<()> {
        for c in [&self.depressed, &self.control] {
            let moments = [
                c.profile_naturalness,
                c.shared_naturalness,
                c.profile_colorfulness,
                c.shared_colorfulness,
                c.reply_degree,
                c.joy,
                c.sadness,
                c.age,
            ];
            for m in moments.iter().chain(c.text.values()) {
                m.normal()?;
            }
            let probs = [c.reciprocity, c.profile_face_prob, c.shared_face_prob, c.female_prob, c.mangled_name_prob];
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput("class probabilities must lie in [0,1]".into()));
            }
            if c.social_means.iter().any(|m| !(m.is_finite() && *m >= 0.0))
                || c.social_log_sd.is_nan()
                || c.social_log_sd < 0.0
            {
                return Err(Error::InvalidInput("social moments must be non-negative".into()));
            }
            for k in c.text.keys() {
                if word_pool(k).is_none() {
                    return Err(Error::InvalidInput(format!("no word pool for category `{k}`")));
                }
            }
        }
        if self.shared_images.0 > self.shared_images.1 || self.image_size < 8 {
            return Err(Error::InvalidInput("invalid image layout".into()));
        }
        Ok(())
    }
}

/// Words that fall into exactly one built-in category.
fn word_pool(category: &str) -> Option<&'static [&'static str]> {
    Some(match category {
        "self" => &["i", "me", "my", "myself", "mine"],
        "we" => &["we", "us", "our", "ourselves"],
        "you" => &["you", "your", "yourself", "ur"],
        "article" => &["a", "an", "the"],
        "negate" => &["no", "not", "never", "nothing", "nobody"],
        "cogn" => &["think", "know", "because", "maybe", "believe", "understand"],
        "posemo" => &["happy", "love", "good", "great", "fun", "awesome", "beautiful", "glad"],
        "negemo" => &["sad", "lonely", "alone", "empty", "tired", "miserable", "worthless", "upset"],
        "swear" => &["damn", "shit", "crap", "hell"],
        "death" => &["die", "dead", "death", "dying"],
        "work" => &["work", "job", "boss", "office", "career"],
        "family" => &["family", "sister", "brother", "aunt", "uncle"],
        "friend" => &["friend", "buddy", "friends", "mates"],
        _ => return None,
    })
}

const FILLER: &[&str] = &[
    "today",
    "weather",
    "coffee",
    "music",
    "city",
    "bus",
    "game",
    "street",
    "movie",
    "train",
    "pizza",
    "phone",
    "photo",
    "garden",
    "window",
    "yesterday",
    "morning",
    "tonight",
    "weekend",
    "football",
    "concert",
    "kitchen",
    "computer",
    "journey",
    "chocolate",
    "tomorrow",
    "holiday",
    "newspaper",
    "birthday",
    "river",
    "mountain",
    "television",
    "breakfast",
    "sandwich",
    "playlist",
    "station",
    "library",
    "village",
    "traffic",
    "weather",
];

const NEGATIVE_QUOTES: &[&str] =
    &["the world is a lonely place", "i am so tired of everything", "nobody hears me when i cry", "empty inside again"];
const POSITIVE_QUOTES: &[&str] =
    &["have a great day", "love this beautiful morning", "good vibes only", "happy weekend friends"];
const INTERESTS: &[&str] =
    &["music lover", "coffee addict", "gamer", "runner", "artist", "student", "traveller", "writer"];
const DEPRESSED_DESCRIPTORS: &[&str] = &["anxiety, depression", "self-harm survivor", "tired of everything", "broken"];
const MANGLE_BASE: &[&str] = &["depressed", "suicidal", "lonely", "broken", "worthless", "sadgirl", "sadboy"];
const NAME_BASE: &[&str] = &["sunny", "blue", "river", "pixel", "maple", "echo", "nova", "atlas", "willow", "comet"];

/// Everything the synthetic run produced: records plus the pixel and
/// provider data their image references resolve to.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub images: MemoryImageSource,
    pub provider: FixtureProvider,
}

impl SyntheticCorpus {
    /// Writes the corpus to `corpus_path`, fixtures to `fixtures_path` and
    /// PNG images below `image_root` at their reference paths.
    pub fn write(&self, corpus_path: &Path, fixtures_path: &Path, image_root: &Path) -> Result<()> {
        crate::corpus::save_corpus(&self.corpus, corpus_path)?;
        self.provider.save(fixtures_path)?;
        for (r, img) in self.images.iter() {
            let path = image_root.join(r);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(&path, img.to_png()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

struct Rendered {
    user: UserRecord,
    images: Vec<(String, PixelBuffer)>,
    fixtures: Vec<(String, ProviderResponse)>,
}

pub fn generate_synthetic_corpus(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let n = spec.n_depressed + spec.n_control;
    let labels: Vec<Label> =
        (0..n).map(|i| if i < spec.n_depressed { Label::Depressed } else { Label::Control }).collect();
    // interleave classes in id order so ids carry no label information
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, stream::SYNTH_GRAPH, u64::MAX));
    let labels: Vec<Label> = order.iter().map(|&i| labels[i]).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("u{i:05}")).collect();
    let edges = reply_graph(spec, &labels, &ids, seed);
    let rendered: Vec<Rendered> = (0..n)
        .into_par_iter()
        .map(|i| render_user(spec, seed, i, &ids[i], labels[i], &edges[i]))
        .collect::<Result<_>>()?;
    let mut images = MemoryImageSource::new();
    let mut provider = FixtureProvider::new();
    let mut users = Vec::with_capacity(n);
    for r in rendered {
        for (k, img) in r.images {
            images.insert(k, img);
        }
        for (k, resp) in r.fixtures {
            provider.insert(k, resp)?;
        }
        users.push(r.user);
    }
    let corpus = Corpus::new(users, Some(spec.collection_year))?;
    Ok(SyntheticCorpus { corpus, images, provider })
}

fn reply_graph(spec: &GeneratorSpec, labels: &[Label], ids: &[String], seed: u64) -> Vec<Vec<ReplyEdge>> {
    let n = ids.len();
    let mut edges: Vec<Vec<ReplyEdge>> = vec![Vec::new(); n];
    if n < 2 {
        return edges;
    }
    for i in 0..n {
        let mut rng = rng_for(seed, stream::SYNTH_GRAPH, i as u64);
        let c = class(spec, labels[i]);
        let k = (c.reply_degree.draw(&mut rng).round().max(0.0) as usize).min(n - 1);
        let mut partners = rand::seq::index::sample(&mut rng, n - 1, k).into_vec();
        partners.sort_unstable();
        for p in partners {
            let j = if p >= i { p + 1 } else { p };
            let out = ReplyEdge { from: ids[i].clone(), to: ids[j].clone(), count: rng.random_range(1..=5) };
            edges[i].push(out);
            if rng.random_bool(c.reciprocity) {
                edges[i].push(ReplyEdge { from: ids[j].clone(), to: ids[i].clone(), count: rng.random_range(1..=5) });
            }
        }
    }
    edges
}

fn class(spec: &GeneratorSpec, label: Label) -> &ClassMoments {
    match label {
        Label::Depressed => &spec.depressed,
        Label::Control => &spec.control,
    }
}

fn render_user(
    spec: &GeneratorSpec,
    seed: u64,
    i: usize,
    id: &str,
    label: Label,
    edges: &[ReplyEdge],
) -> Result<Rendered> {
    let mut rng = rng_for(seed, stream::SYNTH_USER, i as u64);
    let c = class(spec, label);
    let mut user = UserRecord::new(id);
    user.label = Some(label);
    user.reply_edges = edges.to_vec();

    let age = c.age.draw(&mut rng).round().clamp(12.0, 58.0) as u32;
    let gender = if rng.random_bool(c.female_prob) { Gender::Female } else { Gender::Male };
    user.profile_description = description(spec, &mut rng, label, age, gender);
    user.screen_name = screen_name(&mut rng, c.mangled_name_prob, i);

    let social: Vec<f64> = c
        .social_means
        .iter()
        .map(|&m| {
            let z = std_normal(&mut rng);
            let s = c.social_log_sd;
            m * (s * z - 0.5 * s * s).exp()
        })
        .collect();
    user.followers_count = social[0].round();
    user.friends_count = social[1].round();
    user.statuses_count = social[2].round();
    user.favourites_count = social[3].round();
    user.avg_retweet_count = social[4];
    user.avg_favorite_count = social[5];

    user.tweets = tweets(spec, &mut rng, c, age)?;

    let mut images = Vec::new();
    let mut fixtures = Vec::new();
    let size = spec.image_size;
    let profile_ref = format!("images/{id}_p.png");
    let nat = c.profile_naturalness.draw(&mut rng);
    let col = c.profile_colorfulness.draw(&mut rng);
    images.push((profile_ref.clone(), render_image(&mut rng, size, nat, col)?));
    let face = rng.random_bool(c.profile_face_prob);
    fixtures.push((profile_ref.clone(), fixture(&mut rng, c, label, size, face, age, gender, false, spec.ocr_prob)));
    user.profile_image = Some(profile_ref);

    let k = rng.random_range(spec.shared_images.0..=spec.shared_images.1);
    let nat = c.shared_naturalness.draw(&mut rng);
    let col = c.shared_colorfulness.draw(&mut rng);
    for s in 0..k {
        let r = format!("images/{id}_s{s}.png");
        let jn = nat + 0.02 * std_normal(&mut rng);
        let jc = col + 3.0 * std_normal(&mut rng);
        images.push((r.clone(), render_image(&mut rng, size, jn, jc)?));
        let face = rng.random_bool(c.shared_face_prob);
        fixtures.push((r.clone(), fixture(&mut rng, c, label, size, face, age, gender, true, spec.ocr_prob)));
        user.shared_images.push(r);
    }
    Ok(Rendered { user, images, fixtures })
}

fn description(spec: &GeneratorSpec, rng: &mut ChaCha8Rng, label: Label, age: u32, gender: Gender) -> String {
    let mut parts: Vec<String> = Vec::new();
    if rng.random_bool(spec.age_disclosure_prob) {
        parts.push(match rng.random_range(0..3) {
            0 => format!("I am {age} years old"),
            1 => format!("born in {}", spec.collection_year - age as i32),
            _ => format!("{age} years old"),
        });
    }
    if rng.random_bool(spec.gender_disclosure_prob) {
        let words: &[&str] = match (gender, age < 25) {
            (Gender::Female, true) => &["girl"],
            (Gender::Female, false) => &["woman", "mom", "wife"],
            (Gender::Male, true) => &["boy"],
            (Gender::Male, false) => &["man", "dad", "husband"],
        };
        parts.push(words.choose(rng).expect("non-empty").to_string());
    }
    parts.push(INTERESTS.choose(rng).expect("non-empty").to_string());
    if label == Label::Depressed && rng.random_bool(0.4) {
        parts.push(DEPRESSED_DESCRIPTORS.choose(rng).expect("non-empty").to_string());
    }
    parts.join(", ")
}

fn screen_name(rng: &mut ChaCha8Rng, mangle_prob: f64, i: usize) -> String {
    if rng.random_bool(mangle_prob) {
        let base: Vec<char> = MANGLE_BASE.choose(rng).expect("non-empty").chars().collect();
        let mut s: String = base.iter().collect();
        if rng.random_bool(0.5) {
            // one substitution keeps the edit distance at 1
            let pos = rng.random_range(0..base.len());
            let mut chars = base.clone();
            chars[pos] = ['x', 'z', 'q'][rng.random_range(0..3)];
            s = chars.into_iter().collect();
        }
        format!("{s}_{}", i % 100)
    } else {
        format!("{}{}_{}", NAME_BASE.choose(rng).expect("non-empty"), FILLER.choose(rng).expect("non-empty"), i % 1000)
    }
}

fn tweets(spec: &GeneratorSpec, rng: &mut ChaCha8Rng, c: &ClassMoments, age: u32) -> Result<Vec<Tweet>> {
    let total = spec.tweets_per_user * spec.tokens_per_tweet;
    let mut tokens: Vec<&str> = Vec::with_capacity(total);
    // language shifts with age: more articles, fewer self references
    let shift = f64::from(age) - 25.0;
    for (cat, m) in &c.text {
        let mut pct = m.draw(rng);
        match cat.as_str() {
            "article" => pct += 0.08 * shift,
            "self" => pct -= 0.05 * shift,
            _ => {}
        }
        let count = ((pct.max(0.0) / 100.0) * total as f64).round() as usize;
        let pool = word_pool(cat).expect("validated");
        for _ in 0..count {
            if tokens.len() < total {
                tokens.push(pool.choose(rng).expect("non-empty"));
            }
        }
    }
    while tokens.len() < total {
        tokens.push(FILLER.choose(rng).expect("non-empty"));
    }
    tokens.shuffle(rng);
    let start = chrono::NaiveDate::from_ymd_opt(spec.collection_year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::InvalidInput(format!("invalid collection year {}", spec.collection_year)))?
        .and_utc()
        .timestamp();
    let mut ts: Vec<i64> = (0..spec.tweets_per_user).map(|_| start + rng.random_range(0..364 * 86_400)).collect();
    ts.sort_unstable();
    Ok(tokens
        .chunks(spec.tokens_per_tweet.max(1))
        .zip(ts)
        .map(|(words, ts)| Tweet { ts, text: words.join(" ") })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn fixture(
    rng: &mut ChaCha8Rng,
    c: &ClassMoments,
    label: Label,
    size: u32,
    face: bool,
    age: u32,
    gender: Gender,
    shared: bool,
    ocr_prob: f64,
) -> ProviderResponse {
    let mut resp = ProviderResponse::default();
    if face {
        let joy = c.joy.draw(rng).clamp(0.0, 1.0);
        let sadness = c.sadness.draw(rng).clamp(0.0, 1.0);
        let mut rest: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..0.2));
        let total = joy + sadness + rest.iter().sum::<f64>();
        let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
        rest.iter_mut().for_each(|v| *v *= scale);
        let emotions = Emotions::from_values([rest[0], rest[1], rest[2], joy * scale, sadness * scale, rest[3]]);
        let flipped = rng.random_bool(0.15);
        let value = match (gender, flipped) {
            (g, false) => g,
            (Gender::Female, true) => Gender::Male,
            (Gender::Male, true) => Gender::Female,
        };
        let s = f64::from(size);
        resp.faces.push(Face {
            bbox: [s * 0.2, s * 0.2, s * 0.5, s * 0.5],
            emotions,
            age: Some((f64::from(age) + 3.0 * std_normal(rng)).max(1.0)),
            gender: Some(GenderEstimate { value, confidence: rng.random_range(0.6..0.99) }),
        });
    }
    if shared && rng.random_bool(ocr_prob) {
        let quotes = if label == Label::Depressed { NEGATIVE_QUOTES } else { POSITIVE_QUOTES };
        resp.ocr_text = quotes.choose(rng).expect("non-empty").to_string();
    }
    resp
}

const SKY_HUE: f64 = 220.0;
const GRAY: u8 = 128;

/// Sky-hued pixel whose naturalness is closest to `target`.
fn sky_pixel(target: f64) -> [u8; 3] {
    let mut best = ([GRAY; 3], f64::INFINITY);
    for d in 1u16..=254 {
        let max = 128 + d / 2;
        let min = max - d;
        // blue is the maximum, so hue = 60 (4 + (r - g)/c) puts g at r + c (240 - hue)/60
        let g = (f64::from(min) + f64::from(d) * (240.0 - SKY_HUE) / 60.0).round();
        let px = [min as u8, g.clamp(0.0, 255.0) as u8, max.min(255) as u8];
        let img = PixelBuffer::filled(1, 1, px).expect("1x1");
        let v = naturalness(&img).expect("non-empty");
        let err = (v - target).abs();
        if err < best.1 {
            best = (px, err);
        }
    }
    best.0
}

/// Image with a sky band fixing naturalness, a red band tuned by bisection
/// for colourfulness, and an achromatic textured remainder.
pub fn render_image<R: Rng>(
    rng: &mut R,
    size: u32,
    naturalness_target: f64,
    colorfulness_target: f64,
) -> Result<PixelBuffer> {
    let sky = sky_pixel(naturalness_target.clamp(0.05, 1.0));
    let sky_rows = (size * 3) / 10;
    let red_rows = (size * 35) / 100;
    let texture: Vec<u8> = (0..size * size).map(|_| GRAY - 12 + rng.random_range(0..25u8)).collect();
    let build = |a: f64| {
        let red = [
            (f64::from(GRAY) + a * (255.0 - f64::from(GRAY))).round() as u8,
            (f64::from(GRAY) * (1.0 - a)).round() as u8,
            (f64::from(GRAY) * (1.0 - a)).round() as u8,
        ];
        PixelBuffer::from_fn(size, size, |x, y| {
            if y < sky_rows {
                sky
            } else if y >= size - red_rows {
                red
            } else {
                let t = texture[(y * size + x) as usize];
                [t, t, t]
            }
        })
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if colorfulness(&build(hi)?)? <= colorfulness_target {
        return build(hi);
    }
    if colorfulness(&build(lo)?)? >= colorfulness_target {
        return build(lo);
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if colorfulness(&build(mid)?)? < colorfulness_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (build(lo)?, build(hi)?);
    if (colorfulness(&a)? - colorfulness_target).abs() <= (colorfulness(&b)? - colorfulness_target).abs() {
        Ok(a)
    } else {
        Ok(b)
    }
}
