//! Age and gender inference from text (weighted lexicon) and from face
//! estimates, with one-vs-rest per-group evaluation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{assign_age_group, AgeGroup, Gender};
use crate::error::{Error, Result};
use crate::providers::FaceAnalysis;
use crate::seed;
use crate::textfeat::parse_term_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemogTarget {
    Age,
    Gender,
}

/// Reserved row name holding the lexicon intercept.
pub const INTERCEPT_TERM: &str = "_intercept";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLexicon {
    pub weights: HashMap<String, f64>,
    pub intercept: f64,
    pub target: DemogTarget,
}

pub const BUILTIN_AGE_LEXICON: &str = include_str!("../data/age_lexicon.csv");
pub const BUILTIN_GENDER_LEXICON: &str = include_str!("../data/gender_lexicon.csv");

impl WeightedLexicon {
    pub fn parse(text: &str, target: DemogTarget) -> Result<Self> {
        let mut weights = HashMap::new();
        let mut intercept = None;
        for (term, w, line) in parse_term_csv(text, "term,weight")? {
            if term == INTERCEPT_TERM {
                if intercept.replace(w).is_some() {
                    return Err(Error::Parse { line, message: "duplicate _intercept row".into() });
                }
            } else if weights.insert(term.clone(), w).is_some() {
                return Err(Error::Parse { line, message: format!("duplicate term `{term}`") });
            }
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput("weighted lexicon has no terms".into()));
        }
        Ok(WeightedLexicon { weights, intercept: intercept.unwrap_or(0.0), target })
    }

    pub fn load(path: impl AsRef<Path>, target: DemogTarget) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?, target)
    }

    pub fn builtin_age() -> Self {
        Self::parse(BUILTIN_AGE_LEXICON, DemogTarget::Age).expect("built-in age lexicon parses")
    }

    pub fn builtin_gender() -> Self {
        Self::parse(BUILTIN_GENDER_LEXICON, DemogTarget::Gender).expect("built-in gender lexicon parses")
    }
}

/// `intercept + Σ weight(term) · freq(term, doc) / WC(doc)`.
pub fn lexicon_predict(doc_tokens: &[String], lex: &WeightedLexicon) -> f64 {
    if doc_tokens.is_empty() {
        return lex.intercept;
    }
    let wc = doc_tokens.len() as f64;
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in doc_tokens {
        if lex.weights.contains_key(t.as_str()) {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    lex.intercept + freq.iter().map(|(t, &f)| lex.weights[*t] * f as f64 / wc).sum::<f64>()
}

/// Positive scores are female.
pub fn predict_gender_text(score: f64) -> Gender {
    if score > 0.0 {
        Gender::Female
    } else {
        Gender::Male
    }
}

/// Clamps an age score into the binned range, then bins it.
pub fn predict_age_text(score: f64) -> AgeGroup {
    let lo = f64::from(AgeGroup::MIN_AGE);
    let hi = f64::from(AgeGroup::MAX_AGE - 1);
    let age = if score.is_nan() { lo } else { score.clamp(lo, hi) };
    assign_age_group(age.floor() as u32).expect("clamped into range")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImageDemog {
    pub age_group: Option<AgeGroup>,
    pub gender: Option<Gender>,
}

/// Estimates from the face with the highest gender confidence.
pub fn predict_demog_image(face: &FaceAnalysis) -> ImageDemog {
    let Some(best) = face.most_confident_face() else {
        return ImageDemog::default();
    };
    ImageDemog {
        age_group: best.age.filter(|a| *a >= 0.0).and_then(|a| assign_age_group(a.floor() as u32).ok()),
        gender: best.gender.map(|g| g.value),
    }
}

/// Profile-image estimates win; otherwise the most confident face over all
/// shared images.
pub fn predict_demog_images(profile: Option<&FaceAnalysis>, shared: &[FaceAnalysis]) -> ImageDemog {
    if let Some(p) = profile.filter(|p| !p.faces.is_empty()) {
        return predict_demog_image(p);
    }
    let pooled = FaceAnalysis { faces: shared.iter().flat_map(|a| a.faces.iter().cloned()).collect() };
    predict_demog_image(&pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub support: usize,
}

/// One-vs-rest metrics per group. A ratio whose denominator is empty is
/// reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemogEval {
    pub groups: BTreeMap<String, GroupMetrics>,
    pub overall_accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate_demog<G>(predictions: &[G], truth: &[G]) -> Result<DemogEval>
where
    G: Ord + Clone + fmt::Display,
{
    if predictions.len() != truth.len() {
        return Err(Error::InvalidInput(format!("{} predictions for {} truths", predictions.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no prediction/truth pairs".into()));
    }
    let mut labels: Vec<&G> = truth.iter().chain(predictions).collect();
    labels.sort();
    labels.dedup();
    let n = truth.len();
    let mut groups = BTreeMap::new();
    for g in labels {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (p, t) in predictions.iter().zip(truth) {
            match (p == g, t == g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        groups.insert(
            g.to_string(),
            GroupMetrics {
                sensitivity: ratio(tp, tp + fn_),
                specificity: ratio(tn, tn + fp),
                accuracy: ratio(tp + tn, n),
                support: tp + fn_,
            },
        );
    }
    let correct = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(DemogEval { groups, overall_accuracy: ratio(correct, n) })
}

/// Indices of a class-balanced subsample: every group is randomly cut down
/// to the size of the smallest group.
pub fn balanced_resample<G: Ord + Clone>(groups: &[G], master_seed: u64) -> Vec<usize> {
    let mut by_group: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g.clone()).or_default().push(i);
    }
    let Some(smallest) = by_group.values().map(Vec::len).min() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (k, (_, mut idx)) in by_group.into_iter().enumerate() {
        let mut rng = seed::rng_for(master_seed, seed::stream::RESAMPLE, k as u64);
        idx.shuffle(&mut rng);
        idx.truncate(smallest);
        out.extend(idx);
    }
    out.sort_unstable();
    out
}
