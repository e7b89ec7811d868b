//! User records, line-oriented corpus files and self-disclosure rules.
//!
//! A corpus file is UTF-8 JSON Lines. An optional first line carries the
//! corpus header (`{"format":"persona-signal-corpus","version":1,...}`);
//! every other non-blank line is one [`UserRecord`]. The full grammar is in
//! the book's *File formats* chapter.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, Datelike};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CORPUS_FORMAT: &str = "persona-signal-corpus";
pub const CORPUS_VERSION: u32 = 1;

/// Reference year used when a corpus has neither a header nor any tweets.
pub const FALLBACK_COLLECTION_YEAR: i32 = 2017;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Depressed,
    Control,
}

impl Label {
    /// Positive class indicator used by every classifier in the crate.
    pub fn as_target(self) -> f64 {
        match self {
            Label::Depressed => 1.0,
            Label::Control => 0.0,
        }
    }

    pub fn from_target(y: f64) -> Self {
        if y >= 0.5 {
            Label::Depressed
        } else {
            Label::Control
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Depressed => "depressed",
            Label::Control => "control",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tweet {
    /// Unix seconds, UTC.
    pub ts: i64,
    pub text: String,
}

impl Tweet {
    pub fn year(&self) -> Option<i32> {
        DateTime::from_timestamp(self.ts, 0).map(|d| d.year())
    }
}

/// Directed @-reply volume from one account to another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplyEdge {
    pub from: String,
    pub to: String,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    pub user_id: String,
    #[serde(default)]
    pub screen_name: String,
    #[serde(default)]
    pub profile_description: String,
    #[serde(default)]
    pub tweets: Vec<Tweet>,
    #[serde(default)]
    pub profile_image: Option<String>,
    #[serde(default)]
    pub shared_images: Vec<String>,
    #[serde(default)]
    pub reply_edges: Vec<ReplyEdge>,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub followers_count: f64,
    #[serde(default)]
    pub friends_count: f64,
    #[serde(default)]
    pub statuses_count: f64,
    #[serde(default)]
    pub favourites_count: f64,
    #[serde(default)]
    pub avg_retweet_count: f64,
    #[serde(default)]
    pub avg_favorite_count: f64,
    /// Precomputed summary language variables (e.g. `analytic`, `clout`),
    /// used in place of the built-in surrogate when present.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub liwc: BTreeMap<String, f64>,
}

impl UserRecord {
    pub fn new(user_id: impl Into<String>) -> Self {
        UserRecord {
            user_id: user_id.into(),
            screen_name: String::new(),
            profile_description: String::new(),
            tweets: Vec::new(),
            profile_image: None,
            shared_images: Vec::new(),
            reply_edges: Vec::new(),
            label: None,
            followers_count: 0.0,
            friends_count: 0.0,
            statuses_count: 0.0,
            favourites_count: 0.0,
            avg_retweet_count: 0.0,
            avg_favorite_count: 0.0,
            liwc: BTreeMap::new(),
        }
    }

    /// All tweet texts joined by newlines.
    pub fn document(&self) -> String {
        let mut doc = String::new();
        for (i, t) in self.tweets.iter().enumerate() {
            if i > 0 {
                doc.push('\n');
            }
            doc.push_str(&t.text);
        }
        doc
    }

    pub fn social_counts(&self) -> [(&'static str, f64); 6] {
        [
            ("followers_count", self.followers_count),
            ("friends_count", self.friends_count),
            ("statuses_count", self.statuses_count),
            ("favourites_count", self.favourites_count),
            ("avg_retweet_count", self.avg_retweet_count),
            ("avg_favorite_count", self.avg_favorite_count),
        ]
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        for (name, v) in self.social_counts() {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        for (k, v) in &self.liwc {
            if !v.is_finite() {
                return Err(format!("liwc value `{k}` is not finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusHeader {
    format: String,
    version: u32,
    collection_year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub users: Vec<UserRecord>,
    pub collection_year: i32,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness. The collection year defaults
    /// to the latest tweet year.
    pub fn new(users: Vec<UserRecord>, collection_year: Option<i32>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(users.len());
        for u in &users {
            if !seen.insert(u.user_id.as_str()) {
                return Err(Error::DuplicateUser(u.user_id.clone()));
            }
        }
        let max_year = users.iter().flat_map(|u| u.tweets.iter().filter_map(Tweet::year)).max();
        let collection_year = match (collection_year, max_year) {
            (Some(y), Some(m)) if y < m => {
                return Err(Error::InvalidInput(format!("collection_year {y} precedes tweet year {m}")))
            }
            (Some(y), _) => y,
            (None, Some(m)) => m,
            (None, None) => FALLBACK_COLLECTION_YEAR,
        };
        Ok(Corpus { users, collection_year })
    }

    pub fn empty() -> Self {
        Corpus { users: Vec::new(), collection_year: FALLBACK_COLLECTION_YEAR }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.user_id == user_id)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut users = Vec::new();
        let mut header: Option<CorpusHeader> = None;
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if users.is_empty() && header.is_none() && trimmed.contains("\"format\"") {
                if let Ok(h) = serde_json::from_str::<CorpusHeader>(trimmed) {
                    if h.format != CORPUS_FORMAT || h.version != CORPUS_VERSION {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("unsupported corpus format {} v{}", h.format, h.version),
                        });
                    }
                    header = Some(h);
                    continue;
                }
            }
            let user: UserRecord =
                serde_json::from_str(trimmed).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            user.validate().map_err(|message| Error::Parse { line: lineno, message })?;
            if !seen.insert(user.user_id.clone()) {
                return Err(Error::DuplicateUser(user.user_id));
            }
            users.push(user);
        }
        Corpus::new(users, header.map(|h| h.collection_year))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = CorpusHeader {
            format: CORPUS_FORMAT.to_string(),
            version: CORPUS_VERSION,
            collection_year: self.collection_year,
        };
        let io = |e| Error::io("<corpus writer>", e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for u in &self.users {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("corpus output is UTF-8")
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::read(BufReader::new(file))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    corpus.write(BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Age groups

/// One of five half-open age bins: `[11,19) [19,23) [23,34) [34,46) [46,60)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgeGroup(u8);

impl AgeGroup {
    pub const EDGES: [u32; 6] = [11, 19, 23, 34, 46, 60];
    pub const COUNT: usize = 5;
    pub const MIN_AGE: u32 = 11;
    /// Exclusive upper bound of the last bin.
    pub const MAX_AGE: u32 = 60;

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(AgeGroup(index as u8))
    }

    pub fn all() -> impl Iterator<Item = AgeGroup> {
        (0..Self::COUNT as u8).map(AgeGroup)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `(lo, hi)` with `lo <= age < hi`.
    pub fn bounds(self) -> (u32, u32) {
        (Self::EDGES[self.index()], Self::EDGES[self.index() + 1])
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.bounds();
        write!(f, "[{lo},{hi})")
    }
}

pub fn assign_age_group(age: u32) -> Result<AgeGroup> {
    if !(AgeGroup::MIN_AGE..AgeGroup::MAX_AGE).contains(&age) {
        return Err(Error::Range(format!("age {age} outside [{},{})", AgeGroup::MIN_AGE, AgeGroup::MAX_AGE)));
    }
    let idx = AgeGroup::EDGES[1..].iter().position(|&hi| age < hi).expect("age below the last edge");
    Ok(AgeGroup(idx as u8))
}

// ---------------------------------------------------------------------------
// Self-disclosure rules

const AGE_SUFFIX: &str = r"(?:years?|yrs?)[\s-]*old";

static AGE_RULES: LazyLock<[Regex; 3]> = LazyLock::new(|| {
    [
        // I am X years old
        Regex::new(&format!(r"(?i)\bi\s*(?:am|'m|’m)\s+(\d{{1,4}})\s*{AGE_SUFFIX}\b")).unwrap(),
        // Born in X
        Regex::new(r"(?i)\bborn\s+in\s+(\d{4})\b").unwrap(),
        // X years old
        Regex::new(&format!(r"(?i)\b(\d{{1,4}})[\s-]*{AGE_SUFFIX}\b")).unwrap(),
    ]
});

/// Applies the three age rules in order; the first rule that matches decides.
///
/// A four-digit `X` is read as a birth year. Ages outside `[11, 60)` are
/// discarded.
pub fn extract_age(profile_description: &str, collection_year: i32) -> Option<u32> {
    let caps = AGE_RULES.iter().find_map(|rule| rule.captures(profile_description))?;
    let digits = caps.get(1)?.as_str();
    let x: i64 = digits.parse().ok()?;
    let age = if digits.len() == 4 { i64::from(collection_year) - x } else { x };
    let range = i64::from(AgeGroup::MIN_AGE)..i64::from(AgeGroup::MAX_AGE);
    range.contains(&age).then_some(age as u32)
}

pub const FEMALE_MARKERS: [&str; 8] = ["girl", "woman", "female", "she/her", "mum", "mom", "mother", "wife"];
pub const MALE_MARKERS: [&str; 7] = ["boy", "man", "male", "he/him", "dad", "father", "husband"];

fn marker_regex(markers: &[&str]) -> Regex {
    let alts: Vec<String> = markers.iter().map(|m| regex::escape(m)).collect();
    Regex::new(&format!(r"(?i)(?:^|[^\p{{L}}\p{{N}}/])(?:{})(?:$|[^\p{{L}}\p{{N}}/])", alts.join("|"))).unwrap()
}

static FEMALE_RE: LazyLock<Regex> = LazyLock::new(|| marker_regex(&FEMALE_MARKERS));
static MALE_RE: LazyLock<Regex> = LazyLock::new(|| marker_regex(&MALE_MARKERS));

/// Self-disclosed gender from marker words; `None` when no marker or both
/// marker sets appear.
pub fn extract_gender(profile_description: &str) -> Option<Gender> {
    let female = FEMALE_RE.is_match(profile_description);
    let male = MALE_RE.is_match(profile_description);
    match (female, male) {
        (true, false) => Some(Gender::Female),
        (false, true) => Some(Gender::Male),
        _ => None,
    }
}
