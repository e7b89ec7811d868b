//! Early fusion, imputation, stratified cross-validation and the trained
//! pipeline artifact.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{assign_age_group, extract_age, AgeGroup, Corpus, Gender, Label, UserRecord};
use crate::demog::{lexicon_predict, predict_age_text, predict_demog_images, predict_gender_text, WeightedLexicon};
use crate::error::{Error, Result};
use crate::gbt::{self, GBTModel, GBTParams, Waterfall};
use crate::imgfeat::{image_feature_vector_with, ImageFeatures, NaturalnessConfig};
use crate::matrix::{binary_labels, Matrix};
use crate::netfeat::{ego_features, NetworkFeatures, ReplyGraph};
use crate::providers::{aggregate_emotions, Emotions, FaceAnalysis, ImageSource, VisionProvider};
use crate::seed::{rng_for, stream};
use crate::select::{shadow_select, SelectParams, SelectionReport, Verdict};
use crate::stats::{anova_oneway, bonferroni, chi_square_independence, welch_t_test, TestResult};
use crate::textfeat::{sentiment_score, text_features, tokenize, NgramVocabulary, SummaryVariables, TextLexicons, DIC};

pub use crate::synth::{generate_synthetic_corpus, GeneratorSpec, SyntheticCorpus};

// ---------------------------------------------------------------------------
// Schema

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    ImageProfile,
    ImageShared,
    Face,
    Text,
    Demographic,
    Network,
    Social,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::ImageProfile => "image-profile",
            Modality::ImageShared => "image-shared",
            Modality::Face => "face",
            Modality::Text => "text",
            Modality::Demographic => "demographic",
            Modality::Network => "network",
            Modality::Social => "social",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureDef>,
}

impl Schema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    fn push(&mut self, name: impl Into<String>, modality: Modality) {
        self.features.push(FeatureDef { name: name.into(), modality });
    }
}

/// One user's fused features. Masked entries hold 0 until imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema: Arc<Schema>,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl FeatureVector {
    pub fn new(schema: Arc<Schema>, values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.len() != schema.len() || missing.len() != schema.len() {
            return Err(Error::SchemaMismatch { expected: schema.len(), actual: values.len().max(missing.len()) });
        }
        Ok(FeatureVector { schema, values, missing })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = self.schema.index_of(name)?;
        (!self.missing[i]).then_some(self.values[i])
    }
}

// ---------------------------------------------------------------------------
// Featurization

/// Lexicons and constants used to featurize users.
#[derive(Debug, Clone)]
pub struct FeaturizeConfig {
    pub lexicons: TextLexicons,
    pub age_lexicon: WeightedLexicon,
    pub gender_lexicon: WeightedLexicon,
    pub naturalness: NaturalnessConfig,
    /// Adds one count feature per vocabulary n-gram when set.
    pub ngrams: Option<NgramVocabulary>,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig {
            lexicons: TextLexicons::builtin(),
            age_lexicon: WeightedLexicon::builtin_age(),
            gender_lexicon: WeightedLexicon::builtin_gender(),
            naturalness: NaturalnessConfig::default(),
            ngrams: None,
        }
    }
}

pub const FACE_SUMMARY: [&str; 5] =
    ["face_positive", "face_negative", "face_count", "profile_face_present", "ocr_sentiment"];
pub const DEMOG_NAMES: [&str; 4] =
    ["demog_text_age_group", "demog_text_female", "demog_image_age_group", "demog_image_female"];
pub const TEXT_SCALARS: [&str; 3] = ["sixltr", "sentiment", "screen_name_similarity"];

/// Fused feature layout for a configuration. Order: profile image, shared
/// images, faces, text, demographics, network, social counts.
pub fn build_schema(config: &FeaturizeConfig) -> Schema {
    let mut s = Schema::default();
    for n in ImageFeatures::NAMES {
        s.push(format!("profile_{n}"), Modality::ImageProfile);
    }
    for n in ImageFeatures::NAMES {
        s.push(format!("shared_{n}"), Modality::ImageShared);
    }
    s.push("shared_image_count", Modality::ImageShared);
    for n in Emotions::NAMES {
        s.push(format!("face_{n}"), Modality::Face);
    }
    for n in FACE_SUMMARY {
        s.push(n, Modality::Face);
    }
    s.push("word_count", Modality::Text);
    let mut cats: Vec<&str> = config.lexicons.categories.names().collect();
    cats.push(DIC);
    for c in cats {
        s.push(format!("text_{c}"), Modality::Text);
    }
    for n in TEXT_SCALARS {
        s.push(n, Modality::Text);
    }
    for n in SummaryVariables::NAMES {
        s.push(n, Modality::Text);
    }
    if let Some(v) = &config.ngrams {
        for t in &v.terms {
            s.push(format!("ngram:{t}"), Modality::Text);
        }
    }
    for n in DEMOG_NAMES {
        s.push(n, Modality::Demographic);
    }
    for n in NetworkFeatures::NAMES {
        s.push(n, Modality::Network);
    }
    for (n, _) in UserRecord::new("").social_counts() {
        s.push(n, Modality::Social);
    }
    s
}

/// Fits an n-gram vocabulary over every user's tweets.
pub fn fit_ngram_vocabulary(corpus: &Corpus, config: crate::textfeat::NgramConfig) -> NgramVocabulary {
    let docs: Vec<Vec<String>> = corpus.users.iter().map(|u| tokenize(&u.document())).collect();
    NgramVocabulary::fit(docs.iter().map(Vec::as_slice), config)
}

pub struct Featurizer<'a> {
    pub config: &'a FeaturizeConfig,
    pub images: &'a dyn ImageSource,
    pub provider: &'a dyn VisionProvider,
    pub graph: ReplyGraph,
    pub schema: Arc<Schema>,
}

/// Accumulates values in schema order with a missing flag per entry.
struct Row {
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Row {
    fn put(&mut self, v: Option<f64>) {
        self.values.push(v.unwrap_or(0.0));
        self.missing.push(v.is_none());
    }

    fn put_all<I: IntoIterator<Item = f64>>(&mut self, vs: Option<I>, n: usize) {
        match vs {
            Some(vs) => vs.into_iter().for_each(|v| self.put(Some(v))),
            None => (0..n).for_each(|_| self.put(None)),
        }
    }
}

fn female(g: Gender) -> f64 {
    f64::from(g == Gender::Female)
}

impl<'a> Featurizer<'a> {
    pub fn new(
        corpus: &Corpus,
        config: &'a FeaturizeConfig,
        images: &'a dyn ImageSource,
        provider: &'a dyn VisionProvider,
    ) -> Self {
        Featurizer {
            config,
            images,
            provider,
            graph: ReplyGraph::from_corpus(corpus),
            schema: Arc::new(build_schema(config)),
        }
    }

    fn image(&self, user: &str, r: &str) -> Option<ImageFeatures> {
        match self.images.load(r).and_then(|img| image_feature_vector_with(&img, &self.config.naturalness)) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("user {user}: image {r}: {e}");
                None
            }
        }
    }

    fn faces(&self, user: &str, r: &str) -> Option<FaceAnalysis> {
        match self.provider.analyze_faces(r) {
            Ok(a) => Some(a),
            Err(e) => {
                log::warn!("user {user}: faces for {r}: {e}");
                None
            }
        }
    }

    /// Never fails: modality errors are logged and masked.
    pub fn featurize_user(&self, user: &UserRecord) -> FeatureVector {
        let id = user.user_id.as_str();
        let mut row =
            Row { values: Vec::with_capacity(self.schema.len()), missing: Vec::with_capacity(self.schema.len()) };
        let n_img = ImageFeatures::NAMES.len();

        let profile = user.profile_image.as_deref().and_then(|r| self.image(id, r));
        row.put_all(profile.map(|f| f.values()), n_img);

        let shared: Vec<ImageFeatures> = user.shared_images.iter().filter_map(|r| self.image(id, r)).collect();
        let shared_mean = (!shared.is_empty()).then(|| {
            let mut acc = [0.0; 15];
            for f in &shared {
                for (a, v) in acc.iter_mut().zip(f.values()) {
                    *a += v;
                }
            }
            acc.map(|a| a / shared.len() as f64)
        });
        row.put_all(shared_mean, n_img);
        row.put(Some(user.shared_images.len() as f64));

        let profile_faces = user.profile_image.as_deref().and_then(|r| self.faces(id, r));
        let shared_faces: Vec<FaceAnalysis> = user.shared_images.iter().filter_map(|r| self.faces(id, r)).collect();
        let mut analyses: Vec<FaceAnalysis> = shared_faces.clone();
        analyses.extend(profile_faces.clone());
        let emo = aggregate_emotions(&analyses);
        let any_analysis = !analyses.is_empty();
        row.put_all(emo.face_found.then(|| emo.means.values()), Emotions::NAMES.len());
        row.put(emo.face_found.then_some(emo.positive));
        row.put(emo.face_found.then_some(emo.negative));
        row.put(any_analysis.then_some(emo.face_count as f64));
        row.put(profile_faces.as_ref().map(|a| f64::from(!a.faces.is_empty())));
        let ocr: Vec<f64> = user
            .shared_images
            .iter()
            .filter_map(|r| match self.provider.ocr_text(r) {
                Ok(t) if !t.trim().is_empty() => Some(sentiment_score(&t, &self.config.lexicons.sentiment)),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("user {id}: ocr for {r}: {e}");
                    None
                }
            })
            .collect();
        row.put((!ocr.is_empty()).then(|| ocr.iter().sum::<f64>() / ocr.len() as f64));

        let tokens = tokenize(&user.document());
        let precomputed = SummaryVariables::from_map(&user.liwc);
        let text =
            text_features(&tokens, &user.screen_name, &self.config.lexicons, precomputed, self.config.ngrams.as_ref());
        let has_text = !tokens.is_empty();
        let n_cats = self.config.lexicons.categories.len() + 1;
        let n_ngrams = self.config.ngrams.as_ref().map_or(0, |v| v.terms.len());
        match &text {
            Ok(t) => {
                row.put(Some(t.word_count as f64));
                row.put_all(has_text.then(|| t.categories.values().copied().collect::<Vec<_>>()), n_cats);
                row.put(has_text.then_some(t.sixltr_pct));
                row.put(has_text.then_some(t.sentiment));
                row.put(Some(t.screen_name_similarity));
                row.put_all((has_text || precomputed.is_some()).then(|| t.summary.values()), 4);
                row.put_all(has_text.then(|| t.ngrams.clone()), n_ngrams);
            }
            Err(e) => {
                log::warn!("user {id}: text features: {e}");
                row.put_all(None::<Vec<f64>>, 1 + n_cats + 3 + 4 + n_ngrams);
            }
        }

        let mut demog_tokens = tokens.clone();
        demog_tokens.extend(tokenize(&user.profile_description));
        if demog_tokens.is_empty() {
            row.put_all(None::<Vec<f64>>, 2);
        } else {
            let age = predict_age_text(lexicon_predict(&demog_tokens, &self.config.age_lexicon));
            let gender = predict_gender_text(lexicon_predict(&demog_tokens, &self.config.gender_lexicon));
            row.put(Some(age.index() as f64));
            row.put(Some(female(gender)));
        }
        let img_demog = predict_demog_images(profile_faces.as_ref(), &shared_faces);
        row.put(img_demog.age_group.map(|g| g.index() as f64));
        row.put(img_demog.gender.map(female));

        match self.graph.ego_graph(id) {
            Ok(g) => row.put_all(Some(ego_features(&g).values()), NetworkFeatures::NAMES.len()),
            Err(e) => {
                log::warn!("user {id}: network: {e}");
                row.put_all(None::<Vec<f64>>, NetworkFeatures::NAMES.len());
            }
        }
        for (_, v) in user.social_counts() {
            row.put(Some(v));
        }
        debug_assert_eq!(row.values.len(), self.schema.len());
        FeatureVector { schema: self.schema.clone(), values: row.values, missing: row.missing }
    }
}

pub fn featurize_user(
    user: &UserRecord,
    corpus: &Corpus,
    config: &FeaturizeConfig,
    images: &dyn ImageSource,
    provider: &dyn VisionProvider,
) -> FeatureVector {
    Featurizer::new(corpus, config, images, provider).featurize_user(user)
}

/// Featurized corpus, one row per user in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: Arc<Schema>,
    pub user_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// 0/1 targets; every user must be labeled.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.labels
            .iter()
            .zip(&self.user_ids)
            .map(|(l, id)| {
                l.map(Label::as_target).ok_or_else(|| Error::InvalidInput(format!("user `{id}` has no label")))
            })
            .collect()
    }

    /// Tab-separated rows with `NA` for masked entries; the second header
    /// line carries each feature's modality.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("user_id\tlabel");
        for f in &self.schema.features {
            let _ = write!(out, "\t{}", f.name);
        }
        out.push_str("\n#modality\t");
        for f in &self.schema.features {
            let _ = write!(out, "\t{}", f.modality);
        }
        out.push('\n');
        for ((id, label), row) in self.user_ids.iter().zip(&self.labels).zip(&self.rows) {
            out.push_str(id);
            out.push('\t');
            if let Some(l) = label {
                out.push_str(&l.to_string());
            }
            for (v, m) in row.values.iter().zip(&row.missing) {
                if *m {
                    out.push_str("\tNA");
                } else {
                    let _ = write!(out, "\t{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Featurizes every user in parallel; row order follows the corpus.
pub fn featurize_corpus(
    corpus: &Corpus,
    config: &FeaturizeConfig,
    images: &dyn ImageSource,
    provider: &dyn VisionProvider,
) -> FeatureTable {
    let f = Featurizer::new(corpus, config, images, provider);
    let rows: Vec<FeatureVector> = corpus.users.par_iter().map(|u| f.featurize_user(u)).collect();
    FeatureTable {
        schema: f.schema.clone(),
        user_ids: corpus.users.iter().map(|u| u.user_id.clone()).collect(),
        labels: corpus.users.iter().map(|u| u.label).collect(),
        rows,
    }
}

// ---------------------------------------------------------------------------
// Imputation

/// Training-fold medians for masked entries plus one `<name>_missing`
/// indicator per feature that was masked anywhere in the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub input: Vec<String>,
    pub medians: Vec<f64>,
    pub indicators: Vec<usize>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

impl Imputer {
    /// A feature masked in every training row imputes to 0.
    pub fn fit<'a, I: IntoIterator<Item = &'a FeatureVector>>(rows: I) -> Result<Self> {
        let rows: Vec<&FeatureVector> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::InvalidInput("cannot fit an imputer on zero rows".into()));
        };
        let d = first.schema.len();
        if rows.iter().any(|r| r.values.len() != d) {
            return Err(Error::SchemaMismatch {
                expected: d,
                actual: rows.iter().map(|r| r.values.len()).find(|&l| l != d).unwrap_or(d),
            });
        }
        let medians = (0..d)
            .map(|j| median(rows.iter().filter(|r| !r.missing[j]).map(|r| r.values[j]).collect()).unwrap_or(0.0))
            .collect();
        let indicators = (0..d).filter(|&j| rows.iter().any(|r| r.missing[j])).collect();
        Ok(Imputer { input: first.schema.names(), medians, indicators })
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names = self.input.clone();
        names.extend(self.indicators.iter().map(|&j| format!("{}_missing", self.input[j])));
        names
    }

    pub fn transform(&self, v: &FeatureVector) -> Result<Vec<f64>> {
        if v.values.len() != self.input.len() {
            return Err(Error::SchemaMismatch { expected: self.input.len(), actual: v.values.len() });
        }
        let mut out: Vec<f64> = v
            .values
            .iter()
            .zip(&v.missing)
            .zip(&self.medians)
            .map(|((&x, &m), &med)| if m { med } else { x })
            .collect();
        out.extend(self.indicators.iter().map(|&j| f64::from(v.missing[j])));
        Ok(out)
    }

    pub fn transform_all<'a, I: IntoIterator<Item = &'a FeatureVector>>(&self, rows: I) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| self.transform(r)).collect::<Result<_>>()?;
        if rows.is_empty() {
            return Matrix::new(0, self.input.len() + self.indicators.len(), Vec::new());
        }
        Matrix::from_rows(&rows)
    }
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Positive class is 1 (depressed).
    pub fn from_predictions(pred: &[u8], truth: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Empty denominators give 0.
    pub fn from_confusion(c: &Confusion) -> Self {
        Metrics {
            sensitivity: ratio(c.tp, c.tp + c.fn_),
            specificity: ratio(c.tn, c.tn + c.fp),
            precision: ratio(c.tp, c.tp + c.fp),
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            accuracy: ratio(c.tp + c.tn, c.total()),
        }
    }

    pub fn mean(ms: &[Metrics]) -> Metrics {
        let n = ms.len().max(1) as f64;
        let s = |f: fn(&Metrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
        Metrics {
            sensitivity: s(|m| m.sensitivity),
            specificity: s(|m| m.specificity),
            precision: s(|m| m.precision),
            f1: s(|m| m.f1),
            accuracy: s(|m| m.accuracy),
        }
    }
}

// ---------------------------------------------------------------------------
// Learners and cross-validation

pub trait Predictor: Send + Sync {
    fn predict_proba(&self, x: &[f64]) -> Result<f64>;
}

pub trait Learner: Sync {
    fn fit(&self, x: &Matrix, y: &[f64], names: &[String]) -> Result<Box<dyn Predictor>>;
}

impl Predictor for GBTModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        gbt::predict_proba(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtLearner(pub GBTParams);

impl Learner for GbtLearner {
    fn fit(&self, x: &Matrix, y: &[f64], names: &[String]) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(gbt::fit(x, y, names, &self.0)?))
    }
}

/// Stratified fold index per row: each class is shuffled and dealt
/// round-robin over the folds.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    let labels = binary_labels(y)?;
    if k < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    let mut fold = vec![0usize; y.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::InvalidInput(format!("class {class} has {} rows, fewer than {k} folds", idx.len())));
        }
        idx.shuffle(&mut rng_for(seed, stream::FOLDS, u64::from(class)));
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    /// Shadow selection inside each training fold when set.
    pub selection: Option<SelectParams>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k: 10, seed: 0, selection: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub imputer: Imputer,
    pub selected: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

impl CvReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("fold\tn_train\tn_test\ttp\tfp\ttn\tfn\tsensitivity\tspecificity\tf1\taccuracy\n");
        for f in &self.folds {
            let c = f.confusion;
            let m = f.metrics;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.fold,
                f.n_train,
                f.n_test,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                fmt6(m.sensitivity),
                fmt6(m.specificity),
                fmt6(m.f1),
                fmt6(m.accuracy)
            );
        }
        let m = self.mean;
        let _ = writeln!(
            out,
            "mean\t\t\t\t\t\t\t{}\t{}\t{}\t{}",
            fmt6(m.sensitivity),
            fmt6(m.specificity),
            fmt6(m.f1),
            fmt6(m.accuracy)
        );
        out
    }
}

/// Columns kept after selection: confirmed features, else confirmed and
/// tentative, else everything.
fn kept_columns(report: &SelectionReport) -> Vec<usize> {
    let confirmed = report.confirmed();
    if !confirmed.is_empty() {
        return confirmed;
    }
    let mut keep: Vec<usize> = report.indices(Verdict::Tentative);
    if keep.is_empty() {
        keep = (0..report.features.len()).collect();
    }
    keep
}

/// Imputation, optional selection and model fitting all happen on the
/// training rows of each fold only.
pub fn cross_validate(rows: &[FeatureVector], y: &[f64], learner: &dyn Learner, cfg: &CvConfig) -> Result<CvReport> {
    if rows.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", rows.len(), y.len())));
    }
    let fold_of = stratified_folds(y, cfg.k, cfg.seed)?;
    let labels = binary_labels(y)?;
    let folds: Vec<FoldReport> = (0..cfg.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] == f).collect();
            let imputer = Imputer::fit(train.iter().map(|&i| &rows[i]))?;
            let names = imputer.output_names();
            let xtr = imputer.transform_all(train.iter().map(|&i| &rows[i]))?;
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let (keep, selected) = match &cfg.selection {
                Some(sp) => {
                    let mut sp = *sp;
                    sp.forest.seed = crate::seed::derive_seed(sp.forest.seed, stream::FOLDS, f as u64);
                    let report = shadow_select(&xtr, &ytr, &names, &sp)?;
                    let keep = kept_columns(&report);
                    let sel = keep.iter().map(|&j| names[j].clone()).collect();
                    (keep, Some(sel))
                }
                None => ((0..names.len()).collect(), None),
            };
            let kept_names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
            let model = learner.fit(&xtr.select_columns(&keep), &ytr, &kept_names)?;
            let mut pred = Vec::with_capacity(test.len());
            for &i in &test {
                let full = imputer.transform(&rows[i])?;
                let x: Vec<f64> = keep.iter().map(|&j| full[j]).collect();
                pred.push(u8::from(model.predict_proba(&x)? >= 0.5));
            }
            let truth: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
            let confusion = Confusion::from_predictions(&pred, &truth);
            Ok(FoldReport {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                confusion,
                metrics: Metrics::from_confusion(&confusion),
                imputer,
                selected,
            })
        })
        .collect::<Result<_>>()?;
    let mean = Metrics::mean(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport { folds, mean })
}

// ---------------------------------------------------------------------------
// Trained pipeline artifact

pub const PIPELINE_FORMAT: &str = "persona-signal-pipeline";
pub const PIPELINE_VERSION: u32 = 1;

/// Imputer, kept columns and booster fitted on a full labeled table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format: String,
    pub version: u32,
    pub schema: Schema,
    pub ngrams: Option<NgramVocabulary>,
    pub imputer: Imputer,
    pub kept: Vec<usize>,
    pub selection: Option<SelectionReport>,
    pub model: GBTModel,
}

impl PipelineModel {
    pub fn fit(
        table: &FeatureTable,
        params: &GBTParams,
        selection: Option<&SelectParams>,
        ngrams: Option<NgramVocabulary>,
    ) -> Result<Self> {
        let y = table.targets()?;
        let imputer = Imputer::fit(&table.rows)?;
        let names = imputer.output_names();
        let x = imputer.transform_all(&table.rows)?;
        let (kept, report) = match selection {
            Some(sp) => {
                let r = shadow_select(&x, &y, &names, sp)?;
                (kept_columns(&r), Some(r))
            }
            None => ((0..names.len()).collect(), None),
        };
        let kept_names: Vec<String> = kept.iter().map(|&j| names[j].clone()).collect();
        let model = gbt::fit(&x.select_columns(&kept), &y, &kept_names, params)?;
        Ok(PipelineModel {
            format: PIPELINE_FORMAT.into(),
            version: PIPELINE_VERSION,
            schema: (*table.schema).clone(),
            ngrams,
            imputer,
            kept,
            selection: report,
            model,
        })
    }

    fn input(&self, v: &FeatureVector) -> Result<Vec<f64>> {
        if *v.schema != self.schema {
            return Err(Error::SchemaMismatch { expected: self.schema.len(), actual: v.schema.len() });
        }
        let full = self.imputer.transform(v)?;
        Ok(self.kept.iter().map(|&j| full[j]).collect())
    }

    pub fn predict_logodds(&self, v: &FeatureVector) -> Result<f64> {
        gbt::predict_logodds(&self.model, &self.input(v)?)
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64> {
        gbt::predict_proba(&self.model, &self.input(v)?)
    }

    pub fn explain(&self, v: &FeatureVector) -> Result<Waterfall> {
        gbt::explain(&self.model, &self.input(v)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: PipelineModel = serde_json::from_str(text)?;
        if m.format != PIPELINE_FORMAT || m.version != PIPELINE_VERSION {
            return Err(Error::InvalidInput(format!("unsupported pipeline format {} v{}", m.format, m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

// ---------------------------------------------------------------------------
// Group reports

/// Depressed-vs-control Welch test of one feature over non-masked values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub feature: String,
    pub modality: Modality,
    pub mean_depressed: f64,
    pub mean_control: f64,
    pub test: Option<TestResult>,
}

fn column(table: &FeatureTable, j: usize, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    (0..table.len()).filter(|&i| keep(i) && !table.rows[i].missing[j]).map(|i| table.rows[i].values[j]).collect()
}

fn mean_or_nan(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn class_comparison(table: &FeatureTable) -> Vec<ComparisonRow> {
    (0..table.schema.len())
        .map(|j| {
            let dep = column(table, j, |i| table.labels[i] == Some(Label::Depressed));
            let ctl = column(table, j, |i| table.labels[i] == Some(Label::Control));
            let def = &table.schema.features[j];
            ComparisonRow {
                feature: def.name.clone(),
                modality: def.modality,
                mean_depressed: mean_or_nan(&dep),
                mean_control: mean_or_nan(&ctl),
                test: welch_t_test(&dep, &ctl).ok(),
            }
        })
        .collect()
}

/// Ground-truth age group per user from profile-description rules.
pub fn disclosed_age_groups(corpus: &Corpus) -> Vec<Option<AgeGroup>> {
    corpus
        .users
        .iter()
        .map(|u| extract_age(&u.profile_description, corpus.collection_year).and_then(|a| assign_age_group(a).ok()))
        .collect()
}

/// Age group with the feature's mean and sample standard deviation.
pub type GroupSummary = (AgeGroup, f64, f64);

/// One-way ANOVA of a feature across disclosed age groups; groups with
/// fewer than two values are left out.
pub fn age_group_anova(
    table: &FeatureTable,
    groups: &[Option<AgeGroup>],
    feature: &str,
) -> Result<(Vec<GroupSummary>, TestResult)> {
    let j =
        table.schema.index_of(feature).ok_or_else(|| Error::InvalidInput(format!("unknown feature `{feature}`")))?;
    let mut samples: BTreeMap<AgeGroup, Vec<f64>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        if let Some(g) = g {
            if !table.rows[i].missing[j] {
                samples.entry(*g).or_default().push(table.rows[i].values[j]);
            }
        }
    }
    samples.retain(|_, v| v.len() >= 2);
    let summary = samples
        .iter()
        .map(|(g, v)| {
            let m = mean_or_nan(v);
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            (*g, m, sd)
        })
        .collect();
    let test = anova_oneway(&samples.into_values().collect::<Vec<_>>())?;
    Ok((summary, test))
}

/// Age group by label contingency test over users with a disclosed age.
pub fn age_label_association(corpus: &Corpus) -> Result<(Vec<AgeGroup>, TestResult)> {
    let groups = disclosed_age_groups(corpus);
    let mut table: BTreeMap<AgeGroup, [f64; 2]> = BTreeMap::new();
    for (u, g) in corpus.users.iter().zip(groups) {
        if let (Some(g), Some(l)) = (g, u.label) {
            table.entry(g).or_insert([0.0; 2])[usize::from(l == Label::Control)] += 1.0;
        }
    }
    let rows: Vec<AgeGroup> = table.keys().copied().collect();
    let counts: Vec<Vec<f64>> = table.values().map(|c| c.to_vec()).collect();
    Ok((rows, chi_square_independence(&counts)?))
}

/// Bonferroni level over a realized schema.
pub fn schema_alpha(schema: &Schema, alpha: f64) -> Result<f64> {
    bonferroni(alpha, schema.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{FixtureProvider, MemoryImageSource};

    fn vector(schema: &Arc<Schema>, values: Vec<f64>, missing: Vec<bool>) -> FeatureVector {
        FeatureVector::new(schema.clone(), values, missing).unwrap()
    }

    fn two_feature_schema() -> Arc<Schema> {
        let mut s = Schema::default();
        s.push("a", Modality::Text);
        s.push("b", Modality::Social);
        Arc::new(s)
    }

    #[test]
    fn imputer_cases() {
        let s = two_feature_schema();
        let rows = vec![
            vector(&s, vec![1.0, 0.0], vec![false, true]),
            vector(&s, vec![3.0, 0.0], vec![false, true]),
            vector(&s, vec![2.0, 0.0], vec![false, true]),
        ];
        let imp = Imputer::fit(&rows).unwrap();
        assert_eq!(imp.output_names(), vec!["a", "b", "b_missing"]);
        assert_eq!(imp.transform(&rows[0]).unwrap(), vec![1.0, 0.0, 1.0]);
        let present = vector(&s, vec![5.0, 7.0], vec![false, false]);
        assert_eq!(imp.transform(&present).unwrap(), vec![5.0, 7.0, 0.0]);
        let masked_a = vector(&s, vec![0.0, 7.0], vec![true, false]);
        assert_eq!(imp.transform(&masked_a).unwrap()[0], 2.0);
        assert!(Imputer::fit(&[]).is_err());
    }

    #[test]
    fn metrics_cases() {
        let c = Confusion::from_predictions(&[1, 1, 1, 1], &[1, 1, 0, 0]);
        let m = Metrics::from_confusion(&c);
        assert_eq!((m.sensitivity, m.specificity, m.accuracy), (1.0, 0.0, 0.5));
        let (p, r) = (m.precision, m.sensitivity);
        assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<f64> = (0..53).map(|i| f64::from(i % 3 == 0)).collect();
        let f = stratified_folds(&y, 5, 1).unwrap();
        for k in 0..5 {
            let pos = (0..53).filter(|&i| f[i] == k && y[i] == 1.0).count();
            assert!((3..=4).contains(&pos));
        }
        assert!(stratified_folds(&y, 40, 1).is_err());
    }

    struct Constant;
    impl Predictor for Constant {
        fn predict_proba(&self, _: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
    }
    struct ConstantLearner;
    impl Learner for ConstantLearner {
        fn fit(&self, _: &Matrix, _: &[f64], _: &[String]) -> Result<Box<dyn Predictor>> {
            Ok(Box::new(Constant))
        }
    }

    #[test]
    fn constant_and_perfect_classifiers() {
        let s = two_feature_schema();
        let y: Vec<f64> = (0..40).map(|i| f64::from(i % 2 == 0)).collect();
        let rows: Vec<FeatureVector> = y.iter().map(|&t| vector(&s, vec![t * 10.0, 1.0], vec![false, false])).collect();
        let cfg = CvConfig { k: 4, seed: 3, selection: None };
        let r = cross_validate(&rows, &y, &ConstantLearner, &cfg).unwrap();
        assert_eq!((r.mean.sensitivity, r.mean.specificity, r.mean.accuracy), (1.0, 0.0, 0.5));
        let gbt = GbtLearner(GBTParams { rounds: 20, min_child_hessian: 0.0, ..Default::default() });
        let r = cross_validate(&rows, &y, &gbt, &cfg).unwrap();
        assert_eq!((r.mean.f1, r.mean.accuracy, r.mean.sensitivity, r.mean.specificity), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn fold_imputers_differ() {
        let s = two_feature_schema();
        let y: Vec<f64> = (0..20).map(|i| f64::from(i % 2 == 0)).collect();
        let rows: Vec<FeatureVector> =
            (0..20).map(|i| vector(&s, vec![i as f64, (i * i) as f64], vec![false, false])).collect();
        let gbt = GbtLearner(GBTParams { rounds: 3, ..Default::default() });
        let r = cross_validate(&rows, &y, &gbt, &CvConfig { k: 4, seed: 1, selection: None }).unwrap();
        assert!(r.folds.windows(2).any(|w| w[0].imputer != w[1].imputer));
    }

    #[test]
    fn featurized_schema_is_stable() {
        let s = generate_synthetic_corpus(&GeneratorSpec::balanced(12), 5).unwrap();
        let config = FeaturizeConfig::default();
        let t = featurize_corpus(&s.corpus, &config, &s.images, &s.provider);
        assert!(t.rows.iter().all(|r| r.values.len() == t.schema.len()));
        assert!(t.rows.iter().all(|r| r.values.iter().all(|v| v.is_finite())));

        let mut bare = s.corpus.users[0].clone();
        bare.profile_image = None;
        bare.shared_images.clear();
        let v = featurize_user(&bare, &s.corpus, &config, &MemoryImageSource::new(), &FixtureProvider::new());
        assert_eq!(v.values.len(), t.schema.len());
        for (def, m) in v.schema.features.iter().zip(&v.missing) {
            match def.modality {
                Modality::ImageProfile => assert!(*m),
                Modality::Social | Modality::Network => assert!(!*m),
                _ => {}
            }
        }
        assert_eq!(v.get("shared_image_count"), Some(0.0));
        assert_eq!(v.get("shared_colorfulness"), None);
    }
}
