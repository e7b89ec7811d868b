//! Tokenization and lexicon-driven language features.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static EMOTICON: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:[:;=8xX]['\-^o]?[()\[\]dDpP/\\|*oO3@$]+|[()\[\]dD/\\|]+['\-^]?[:;=]|<3+|</3)$").unwrap()
});
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{L}\p{N}]+(?:['’][\p{L}\p{N}]+)*").unwrap());

/// Lowercased word tokens. A whitespace-delimited chunk that is entirely an
/// emoticon stays one token; everything else is split on punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if EMOTICON.is_match(chunk) {
            out.push(chunk.to_lowercase());
            continue;
        }
        for m in WORD.find_iter(chunk) {
            out.push(m.as_str().replace('’', "'").to_lowercase());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Category lexicon

#[derive(Debug, Clone, Default, PartialEq)]
struct Category {
    literals: HashSet<String>,
    prefixes: Vec<String>,
}

impl Category {
    fn matches(&self, token: &str) -> bool {
        self.literals.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }
}

/// Named word lists; entries ending in `*` match by prefix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryLexicon {
    categories: BTreeMap<String, Category>,
}

pub const BUILTIN_CATEGORIES: &str = include_str!("../data/categories.lex");

impl CategoryLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATEGORIES).expect("built-in lexicon parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = CategoryLexicon::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r').trim();
            let lineno = idx + 1;
            let err = |message: String| Error::Parse { line: lineno, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('%') {
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                    return Err(err(format!("invalid category name `{name}`")));
                }
                if lex.categories.contains_key(name) {
                    return Err(err(format!("duplicate category `{name}`")));
                }
                lex.categories.insert(name.to_string(), Category::default());
                current = Some(name.to_string());
                continue;
            }
            let Some(cat) = current.as_ref().and_then(|c| lex.categories.get_mut(c)) else {
                return Err(err("entry before the first %category header".into()));
            };
            if line.chars().any(char::is_uppercase) || line.chars().any(char::is_whitespace) {
                return Err(err(format!("entry `{line}` must be a single lowercase token")));
            }
            match line.strip_suffix('*') {
                Some(prefix) if !prefix.is_empty() => cat.prefixes.push(prefix.to_string()),
                Some(_) => return Err(err("bare `*` entry".into())),
                None => {
                    cat.literals.insert(line.to_string());
                }
            }
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Name under which [`category_scores`] reports the any-category hit rate.
pub const DIC: &str = "dic";

/// Percent of tokens hit by each category, plus [`DIC`]. A token may count
/// toward several categories.
pub fn category_scores(tokens: &[String], lex: &CategoryLexicon) -> BTreeMap<String, f64> {
    let mut hits: BTreeMap<&str, usize> = lex.categories.keys().map(|k| (k.as_str(), 0)).collect();
    let mut dic = 0usize;
    for tok in tokens {
        let mut any = false;
        for (name, cat) in &lex.categories {
            if cat.matches(tok) {
                *hits.get_mut(name.as_str()).expect("key present") += 1;
                any = true;
            }
        }
        dic += usize::from(any);
    }
    let pct = |n: usize| {
        if tokens.is_empty() {
            0.0
        } else {
            100.0 * n as f64 / tokens.len() as f64
        }
    };
    let mut out: BTreeMap<String, f64> = hits.into_iter().map(|(k, n)| (k.to_string(), pct(n))).collect();
    out.insert(DIC.to_string(), pct(dic));
    out
}

/// Percent of tokens longer than six characters.
pub fn sixltr_pct(tokens: &[String]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let long = tokens.iter().filter(|t| t.chars().count() > 6).count();
    100.0 * long as f64 / tokens.len() as f64
}

// ---------------------------------------------------------------------------
// Sentiment

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
}

pub const BUILTIN_SENTIMENT: &str = include_str!("../data/sentiment.csv");

/// Parses `key,value` CSV with a fixed header line.
pub(crate) fn parse_term_csv(text: &str, header: &str) -> Result<Vec<(String, f64, usize)>> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r').trim() == header => {}
        _ => return Err(Error::Parse { line: 1, message: format!("expected header `{header}`") }),
    }
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let (term, value) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::Parse { line: lineno, message: "expected `term,value`".into() })?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("bad number `{value}`") })?;
        if !value.is_finite() {
            return Err(Error::Parse { line: lineno, message: "value must be finite".into() });
        }
        let term = term.trim();
        if term.is_empty() || term.chars().any(char::is_uppercase) {
            return Err(Error::Parse { line: lineno, message: format!("term `{term}` must be non-empty lowercase") });
        }
        rows.push((term.to_string(), value, lineno));
    }
    Ok(rows)
}

impl SentimentLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SENTIMENT).expect("built-in sentiment lexicon parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut valence = HashMap::new();
        for (term, v, line) in parse_term_csv(text, "term,valence")? {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Parse { line, message: format!("valence {v} outside [-1,1]") });
            }
            valence.insert(term, v);
        }
        Ok(SentimentLexicon { valence })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn from_pairs<I: IntoIterator<Item = (S, f64)>, S: Into<String>>(pairs: I) -> Self {
        SentimentLexicon { valence: pairs.into_iter().map(|(k, v)| (k.into(), v.clamp(-1.0, 1.0))).collect() }
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }
}

/// Mean valence of the valenced tokens; 0 when none carry valence.
pub fn sentiment_score(text: &str, lex: &SentimentLexicon) -> f64 {
    sentiment_of_tokens(&tokenize(text), lex)
}

pub fn sentiment_of_tokens(tokens: &[String], lex: &SentimentLexicon) -> f64 {
    let (sum, n) = tokens.iter().filter_map(|t| lex.get(t)).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (sum / n.max(1) as f64).clamp(-1.0, 1.0)
}

// ---------------------------------------------------------------------------
// Edit distance

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn normalize_screen_name(name: &str) -> String {
    name.chars().filter(|c| !c.is_ascii_digit() && *c != '_').flat_map(char::to_lowercase).collect()
}

/// Best normalized edit similarity between a screen name and any term.
pub fn screen_name_similarity(screen_name: &str, depression_terms: &[String]) -> Result<f64> {
    if depression_terms.is_empty() {
        return Err(Error::InvalidInput("depression term list is empty".into()));
    }
    let name = normalize_screen_name(screen_name);
    let name_len = name.chars().count();
    let best = depression_terms
        .iter()
        .map(|term| {
            let term = term.to_lowercase();
            let longest = name_len.max(term.chars().count());
            if longest == 0 {
                1.0
            } else {
                1.0 - levenshtein(&name, &term) as f64 / longest as f64
            }
        })
        .fold(0.0f64, f64::max);
    Ok(best)
}

pub const BUILTIN_DEPRESSION_TERMS: &str = include_str!("../data/depression_terms.txt");

pub fn parse_term_list(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect()
}

// ---------------------------------------------------------------------------
// N-grams

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub max_n: usize,
    pub top_k: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig { max_n: 2, top_k: 500 }
    }
}

/// Counts of all 1..=max_n grams, space-joined.
pub fn ngram_counts(tokens: &[String], max_n: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in 1..=max_n {
        for w in tokens.windows(n) {
            *out.entry(w.join(" ")).or_insert(0) += 1;
        }
    }
    out
}

/// The `top_k` most frequent n-grams of a document collection; frequency
/// ties break lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramVocabulary {
    pub config: NgramConfig,
    pub terms: Vec<String>,
}

impl NgramVocabulary {
    pub fn fit<'a, I: IntoIterator<Item = &'a [String]>>(docs: I, config: NgramConfig) -> Self {
        let mut totals: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            for (g, c) in ngram_counts(doc, config.max_n) {
                *totals.entry(g).or_insert(0) += c;
            }
        }
        let mut ranked: Vec<(String, usize)> = totals.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(config.top_k);
        NgramVocabulary { config, terms: ranked.into_iter().map(|(g, _)| g).collect() }
    }

    /// Count of each vocabulary term in `tokens`, in vocabulary order.
    pub fn transform(&self, tokens: &[String]) -> Vec<f64> {
        let counts = ngram_counts(tokens, self.config.max_n);
        self.terms.iter().map(|t| counts.get(t).copied().unwrap_or(0) as f64).collect()
    }
}

// ---------------------------------------------------------------------------
// Summary variables

/// The four summary language variables on a 0..100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryVariables {
    pub analytic: f64,
    pub clout: f64,
    pub authentic: f64,
    pub tone: f64,
}

impl SummaryVariables {
    pub const NAMES: [&'static str; 4] = ["analytic", "clout", "authentic", "tone"];

    pub fn values(&self) -> [f64; 4] {
        [self.analytic, self.clout, self.authentic, self.tone]
    }

    /// Takes the precomputed values from a record when all four are present.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Option<Self> {
        Some(SummaryVariables {
            analytic: *map.get("analytic")?,
            clout: *map.get("clout")?,
            authentic: *map.get("authentic")?,
            tone: *map.get("tone")?,
        })
    }
}

/// Open linear surrogate of the summary variables, computed from category
/// percentages of the built-in lexicon. Each output is clamped to `[0,100]`.
///
/// ```text
/// analytic  = 30 + 6·article + 1.5·sixltr − 2·self − 1.5·cogn − 1.5·negate
/// clout     = 50 + 3·we + 2·you − 3·self
/// authentic = 20 + 3·self − 2·you + 2·negate + 1.5·cogn
/// tone      = 50 + 8·(posemo − negemo)
/// ```
pub fn summary_surrogate(categories: &BTreeMap<String, f64>, sixltr: f64) -> SummaryVariables {
    let c = |k: &str| categories.get(k).copied().unwrap_or(0.0);
    let clamp = |v: f64| v.clamp(0.0, 100.0);
    SummaryVariables {
        analytic: clamp(
            30.0 + 6.0 * c("article") + 1.5 * sixltr - 2.0 * c("self") - 1.5 * c("cogn") - 1.5 * c("negate"),
        ),
        clout: clamp(50.0 + 3.0 * c("we") + 2.0 * c("you") - 3.0 * c("self")),
        authentic: clamp(20.0 + 3.0 * c("self") - 2.0 * c("you") + 2.0 * c("negate") + 1.5 * c("cogn")),
        tone: clamp(50.0 + 8.0 * (c("posemo") - c("negemo"))),
    }
}

// ---------------------------------------------------------------------------
// Aggregate

/// Lexicons needed to featurize text.
#[derive(Debug, Clone)]
pub struct TextLexicons {
    pub categories: CategoryLexicon,
    pub sentiment: SentimentLexicon,
    pub depression_terms: Vec<String>,
}

impl TextLexicons {
    pub fn builtin() -> Self {
        TextLexicons {
            categories: CategoryLexicon::builtin(),
            sentiment: SentimentLexicon::builtin(),
            depression_terms: parse_term_list(BUILTIN_DEPRESSION_TERMS),
        }
    }
}

/// Category used for the first-person-singular rate.
pub const SELF_CATEGORY: &str = "self";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextFeatures {
    pub word_count: usize,
    /// Category percentages including `dic`.
    pub categories: BTreeMap<String, f64>,
    pub sixltr_pct: f64,
    pub sentiment: f64,
    pub self_ref_pct: f64,
    pub screen_name_similarity: f64,
    pub summary: SummaryVariables,
    pub ngrams: Vec<f64>,
}

pub fn text_features(
    tokens: &[String],
    screen_name: &str,
    lex: &TextLexicons,
    precomputed_summary: Option<SummaryVariables>,
    vocabulary: Option<&NgramVocabulary>,
) -> Result<TextFeatures> {
    let categories = category_scores(tokens, &lex.categories);
    let sixltr = sixltr_pct(tokens);
    let summary = precomputed_summary.unwrap_or_else(|| summary_surrogate(&categories, sixltr));
    Ok(TextFeatures {
        word_count: tokens.len(),
        self_ref_pct: categories.get(SELF_CATEGORY).copied().unwrap_or(0.0),
        categories,
        sixltr_pct: sixltr,
        sentiment: sentiment_of_tokens(tokens, &lex.sentiment),
        screen_name_similarity: screen_name_similarity(screen_name, &lex.depression_terms)?,
        summary,
        ngrams: vocabulary.map(|v| v.transform(tokens)).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("I am SAD."), toks(&["i", "am", "sad"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("thx :( lol"), toks(&["thx", ":(", "lol"]));
        assert_eq!(tokenize("don't, stop!"), toks(&["don't", "stop"]));
        assert_eq!(tokenize("see http://t.co/x"), toks(&["see", "http", "t", "co", "x"]));
        assert_eq!(tokenize("yay :D <3"), toks(&["yay", ":d", "<3"]));
    }

    #[test]
    fn category_percentages() {
        let lex = CategoryLexicon::parse("%self\ni\nme\n%pos\nhapp*\n").unwrap();
        let s = category_scores(&toks(&["i", "me", "we"]), &lex);
        assert!((s["self"] - 200.0 / 3.0).abs() < 1e-12);
        assert!((s[DIC] - 200.0 / 3.0).abs() < 1e-12);
        let empty = category_scores(&[], &lex);
        assert!(empty.values().all(|&v| v == 0.0));
        assert_eq!(category_scores(&toks(&["happiness"]), &lex)["pos"], 100.0);
    }

    #[test]
    fn lexicon_grammar_errors() {
        assert!(matches!(CategoryLexicon::parse("i\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(CategoryLexicon::parse("%a\n%a\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(CategoryLexicon::parse("%a\nHello\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(CategoryLexicon::parse("%A\n"), Err(Error::Parse { line: 1, .. })));
        assert!(CategoryLexicon::builtin().len() > 10);
    }

    #[test]
    fn sentiment_cases() {
        let lex = SentimentLexicon::from_pairs([("happy", 0.8), ("good", 0.5), ("bad", -0.5)]);
        assert!((sentiment_score("happy happy", &lex) - 0.8).abs() < 1e-12);
        assert_eq!(sentiment_score("the table", &lex), 0.0);
        assert_eq!(sentiment_score("good bad", &lex), 0.0);
        assert!(matches!(SentimentLexicon::parse("term,valence\nx,1.5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(SentimentLexicon::parse("x,1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn levenshtein_cases() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn screen_names() {
        let terms = vec!["suicidal thoughts".to_string()];
        // normalized "suicidalthoughxxx" is 4 edits from the term (17 chars)
        let s = screen_name_similarity("Suicidal_Thoughxxx", &terms).unwrap();
        assert!((s - (1.0 - 4.0 / 17.0)).abs() < 1e-12);
        assert!(s > 0.6);
        assert_eq!(screen_name_similarity("depression", &["depression".into()]).unwrap(), 1.0);
        assert!(screen_name_similarity("qqqq", &["depression".into()]).unwrap() < 0.2);
        assert!(screen_name_similarity("x", &[]).is_err());
    }

    #[test]
    fn ngrams() {
        let t = toks(&["a", "b", "a", "b"]);
        let c = ngram_counts(&t, 2);
        assert_eq!(c["a"], 2);
        assert_eq!(c["a b"], 2);
        assert_eq!(c["b a"], 1);
        let docs = [t.clone(), toks(&["c"])];
        let v = NgramVocabulary::fit(docs.iter().map(Vec::as_slice), NgramConfig { max_n: 2, top_k: 3 });
        assert_eq!(v.terms, vec!["a", "a b", "b"]);
        assert_eq!(v.transform(&t), vec![2.0, 2.0, 2.0]);
    }

    /// Plain O(nm) table oracle for the rolling-row implementation.
    fn lev_table(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
            }
        }
        d[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn levenshtein_is_a_metric(a in "[abc]{0,7}", b in "[abc]{0,7}", c in "[abc]{0,7}") {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, lev_table(&a, &b));
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        }

        #[test]
        fn category_scores_scale_invariant(words in proptest::collection::vec("[a-z]{1,6}|i|me|sad", 1..30)) {
            let lex = CategoryLexicon::builtin();
            let once = category_scores(&words, &lex);
            let mut twice = words.clone();
            twice.extend(words.iter().cloned());
            let doubled = category_scores(&twice, &lex);
            for (k, v) in &once {
                prop_assert!((0.0..=100.0).contains(v));
                prop_assert!((doubled[k] - v).abs() < 1e-9);
            }
        }

        #[test]
        fn sentiment_bounded_and_sign_symmetric(words in proptest::collection::vec("[a-e]{1,2}", 0..20),
                                                vals in proptest::collection::vec(-1.0f64..=1.0, 5)) {
            let keys = ["a", "b", "c", "d", "e"];
            let lex = SentimentLexicon::from_pairs(keys.iter().zip(&vals).map(|(k, v)| (*k, *v)));
            let neg = SentimentLexicon::from_pairs(keys.iter().zip(&vals).map(|(k, v)| (*k, -*v)));
            let s = sentiment_of_tokens(&words, &lex);
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert!((s + sentiment_of_tokens(&words, &neg)).abs() < 1e-12);
        }
    }
}
