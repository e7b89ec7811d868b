//! Random forest and shadow-feature selection.
//!
//! Each iteration appends a permuted copy of every column, fits a forest to
//! the widened matrix and records a hit for each real feature whose
//! importance Z-score beats the best shadow. Hit counts are then tested
//! against the fair-coin null with a normal approximation.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{binary_labels, Matrix};
use crate::seed::{derive_seed, rng_for, stream};
use crate::stats::{bonferroni, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 100, mtry: None, min_leaf: 1, max_depth: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RfNode {
    Leaf { proba: [f64; 2] },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfTree {
    pub nodes: Vec<RfNode>,
    /// Total weighted Gini decrease per feature, normalized to sum to 1
    /// when the tree has any split.
    pub importance: Vec<f64>,
    pub seed: u64,
    pub oob: Vec<usize>,
}

impl RfTree {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RfNode::Leaf { proba } => return proba[1],
                RfNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RfTree>,
    pub n_features: usize,
}

impl Forest {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) >= 0.5)
    }
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

fn counts(idx: &[usize], y: &[u8]) -> [usize; 2] {
    let mut c = [0, 0];
    for &i in idx {
        c[y[i] as usize] += 1;
    }
    c
}

struct Builder<'a, R> {
    x: &'a Matrix,
    y: &'a [u8],
    params: &'a ForestParams,
    mtry: usize,
    rng: R,
    nodes: Vec<RfNode>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn best_split_on(&self, idx: &[usize], f: usize, parent: [usize; 2]) -> Option<BestSplit> {
        let mut pairs: Vec<(f64, u8)> = idx.iter().map(|&i| (self.x.get(i, f), self.y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let min_leaf = self.params.min_leaf.max(1);
        let base = n as f64 * gini(parent);
        let mut left = [0usize; 2];
        let mut best: Option<BestSplit> = None;
        for k in 0..n - 1 {
            left[pairs[k].1 as usize] += 1;
            let (a, b) = (pairs[k].0, pairs[k + 1].0);
            if a == b || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let dec = base - (k + 1) as f64 * gini(left) - (n - k - 1) as f64 * gini(right);
            if best.as_ref().is_none_or(|s| dec > s.decrease) {
                let mid = 0.5 * (a + b);
                let threshold = if mid < b { mid } else { a };
                best = Some(BestSplit { feature: f, threshold, decrease: dec });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let c = counts(&idx, self.y);
        let n = idx.len();
        let leaf = |c: [usize; 2]| RfNode::Leaf {
            proba: [c[0] as f64 / (c[0] + c[1]) as f64, c[1] as f64 / (c[0] + c[1]) as f64],
        };
        let stop = c[0] == 0
            || c[1] == 0
            || n < 2 * self.params.min_leaf.max(1)
            || self.params.max_depth.is_some_and(|d| depth >= d);
        let slot = self.nodes.len();
        self.nodes.push(leaf(c));
        if stop {
            return slot;
        }
        let mut order: Vec<usize> = (0..self.x.cols()).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<BestSplit> = None;
        // keep drawing past mtry until some feature admits a split
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(&idx, f, c) {
                if best.as_ref().is_none_or(|b| s.decrease > b.decrease) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return slot;
        };
        self.importance[split.feature] += split.decrease.max(0.0);
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = RfNode::Split { feature: split.feature, threshold: split.threshold, left, right };
        slot
    }
}

fn fit_tree(x: &Matrix, y: &[u8], params: &ForestParams, mtry: usize, t: usize) -> RfTree {
    let seed = derive_seed(params.seed, stream::FOREST_TREE, t as u64);
    let mut rng = rng_for(seed, 0, 0);
    let n = x.rows();
    let (sample, oob) = if params.bootstrap {
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut seen = vec![false; n];
        for &i in &sample {
            seen[i] = true;
        }
        let oob = (0..n).filter(|&i| !seen[i]).collect();
        (sample, oob)
    } else {
        ((0..n).collect(), Vec::new())
    };
    let mut b = Builder { x, y, params, mtry, rng, nodes: Vec::new(), importance: vec![0.0; x.cols()] };
    b.grow(sample, 0);
    let total: f64 = b.importance.iter().sum();
    let mut importance = b.importance;
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    RfTree { nodes: b.nodes, importance, seed, oob }
}

/// Trees are fitted in parallel; tree `t` draws from its own generator so
/// the forest does not depend on scheduling.
pub fn train_random_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<Forest> {
    if x.rows() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.cols() == 0 || params.trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one feature and one tree".into()));
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput("forest input contains non-finite values".into()));
    }
    let labels = binary_labels(y)?;
    let mtry = params.mtry.unwrap_or_else(|| (x.cols() as f64).sqrt().floor() as usize).clamp(1, x.cols());
    let trees = (0..params.trees).into_par_iter().map(|t| fit_tree(x, &labels, params, mtry, t)).collect();
    Ok(Forest { trees, n_features: x.cols() })
}

/// Per-feature Z-score of Gini importance across trees: mean over sample
/// standard deviation, 0 when the deviation is 0.
pub fn feature_importance(forest: &Forest, x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if x.cols() != forest.n_features {
        return Err(Error::SchemaMismatch { expected: forest.n_features, actual: x.cols() });
    }
    if x.rows() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    Ok(importance_z(forest))
}

fn importance_z(forest: &Forest) -> Vec<f64> {
    let t = forest.trees.len() as f64;
    (0..forest.n_features)
        .map(|j| {
            let mean = forest.trees.iter().map(|tr| tr.importance[j]).sum::<f64>() / t;
            if forest.trees.len() < 2 {
                return 0.0;
            }
            let var = forest.trees.iter().map(|tr| (tr.importance[j] - mean).powi(2)).sum::<f64>() / (t - 1.0);
            let sd = var.sqrt();
            if sd > 0.0 {
                mean / sd
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Tentative,
    Rejected,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Confirmed => "confirmed",
            Verdict::Tentative => "tentative",
            Verdict::Rejected => "rejected",
        })
    }
}

/// Two-sided test of `hits` out of `trials` against `p = 0.5` using the
/// normal approximation with mean `0.5N` and variance `0.25N`, at level
/// `alpha / m`.
pub fn verdict(hits: usize, trials: usize, alpha: f64, m: usize) -> Result<Verdict> {
    if trials == 0 || hits > trials {
        return Err(Error::InvalidInput(format!("invalid hit count {hits}/{trials}")));
    }
    let level = bonferroni(alpha, m)?;
    let n = trials as f64;
    let z = (hits as f64 - 0.5 * n) / (0.25 * n).sqrt();
    let p = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(if p >= level {
        Verdict::Tentative
    } else if z > 0.0 {
        Verdict::Confirmed
    } else {
        Verdict::Rejected
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub iterations: usize,
    pub alpha: f64,
    pub forest: ForestParams,
}

impl Default for SelectParams {
    fn default() -> Self {
        SelectParams { iterations: 20, alpha: 0.05, forest: ForestParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    pub feature: String,
    pub hits: usize,
    pub trials: usize,
    pub z_mean_importance: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub features: Vec<FeatureVerdict>,
    pub alpha: f64,
}

impl SelectionReport {
    pub fn confirmed(&self) -> Vec<usize> {
        self.indices(Verdict::Confirmed)
    }

    pub fn indices(&self, v: Verdict) -> Vec<usize> {
        (0..self.features.len()).filter(|&i| self.features[i].verdict == v).collect()
    }

    /// Features ordered by mean Z, highest first; ties keep column order.
    pub fn ranking(&self) -> Vec<&FeatureVerdict> {
        let mut r: Vec<&FeatureVerdict> = self.features.iter().collect();
        r.sort_by(|a, b| b.z_mean_importance.total_cmp(&a.z_mean_importance));
        r
    }
}

/// Permutes every column independently.
pub fn shadow_columns<R: Rng>(x: &Matrix, rng: &mut R) -> Matrix {
    let mut data = vec![0.0; x.rows() * x.cols()];
    for j in 0..x.cols() {
        let mut col = x.column(j);
        col.shuffle(rng);
        for (i, v) in col.into_iter().enumerate() {
            data[i * x.cols() + j] = v;
        }
    }
    Matrix::new(x.rows(), x.cols(), data).expect("shape preserved")
}

pub fn shadow_select(x: &Matrix, y: &[f64], names: &[String], params: &SelectParams) -> Result<SelectionReport> {
    if params.iterations < 5 {
        return Err(Error::InvalidInput("shadow selection needs at least 5 iterations".into()));
    }
    if names.len() != x.cols() {
        return Err(Error::SchemaMismatch { expected: x.cols(), actual: names.len() });
    }
    binary_labels(y)?;
    let d = x.cols();
    let mut hits = vec![0usize; d];
    let mut z_sum = vec![0.0; d];
    for r in 0..params.iterations {
        let mut rng = rng_for(params.forest.seed, stream::SHADOW_PERMUTATION, r as u64);
        let wide = x.hcat(&shadow_columns(x, &mut rng))?;
        let fp =
            ForestParams { seed: derive_seed(params.forest.seed, stream::SHADOW_FOREST, r as u64), ..params.forest };
        let forest = train_random_forest(&wide, y, &fp)?;
        let z = importance_z(&forest);
        let max_shadow = z[d..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for j in 0..d {
            z_sum[j] += z[j];
            hits[j] += usize::from(z[j] > max_shadow);
        }
    }
    let features = (0..d)
        .map(|j| {
            Ok(FeatureVerdict {
                feature: names[j].clone(),
                hits: hits[j],
                trials: params.iterations,
                z_mean_importance: z_sum[j] / params.iterations as f64,
                verdict: verdict(hits[j], params.iterations, params.alpha, d)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SelectionReport { features, alpha: params.alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn accuracy(f: &Forest, x: &Matrix, y: &[f64]) -> f64 {
        (0..x.rows()).filter(|&i| f64::from(f.predict(x.row(i))) == y[i]).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_and_deterministic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from(i >= 20)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = ForestParams { trees: 25, seed: 3, ..Default::default() };
        let f = train_random_forest(&x, &y, &p).unwrap();
        assert_eq!(accuracy(&f, &x, &y), 1.0);
        assert_eq!(f, train_random_forest(&x, &y, &p).unwrap());
        for t in &f.trees {
            for n in &t.nodes {
                if let RfNode::Leaf { proba } = n {
                    assert!((proba[0] + proba[1] - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn xor_fits() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = [0.0, 1.0, 1.0, 0.0];
        let p = ForestParams { trees: 10, bootstrap: false, ..Default::default() };
        assert_eq!(accuracy(&train_random_forest(&x, &y, &p).unwrap(), &x, &y), 1.0);
        let boot = ForestParams { trees: 101, seed: 9, ..Default::default() };
        assert_eq!(accuracy(&train_random_forest(&x, &y, &boot).unwrap(), &x, &y), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(train_random_forest(&x, &[1.0, 1.0], &ForestParams::default()), Err(Error::SingleClass)));
    }

    fn planted(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_for(seed, 99, 0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let y = rows.iter().map(|r| f64::from(r[0] > 0.0)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn planted_signal_wins() {
        let (x, y) = planted(200, 6, 1);
        let p = ForestParams { trees: 50, seed: 5, ..Default::default() };
        let f = train_random_forest(&x, &y, &p).unwrap();
        let z = feature_importance(&f, &x, &y).unwrap();
        let argmax = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
        assert_eq!(argmax, 0);
        assert!(feature_importance(&f, &x.select_columns(&[0, 1]), &y).is_err());

        // shuffling the planted column removes its advantage
        let mut cols: Vec<Vec<f64>> = (0..6).map(|j| x.column(j)).collect();
        cols[0].shuffle(&mut rng_for(7, 0, 0));
        let xp = Matrix::from_columns(&cols).unwrap();
        let zp = feature_importance(&train_random_forest(&xp, &y, &p).unwrap(), &xp, &y).unwrap();
        assert!(zp[0] < z[0]);
        assert!(zp[1..].iter().any(|&v| v >= zp[0]) || zp[0] < 0.5 * z[0]);
    }

    #[test]
    fn unused_feature_has_zero_importance() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 1.0]).collect();
        let y: Vec<f64> = (0..30).map(|i| f64::from(i % 3 == 0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let f = train_random_forest(&x, &y, &ForestParams { trees: 10, ..Default::default() }).unwrap();
        assert!(f.trees.iter().all(|t| t.importance[1] == 0.0));
        assert_eq!(feature_importance(&f, &x, &y).unwrap()[1], 0.0);
    }

    #[test]
    fn shadows_are_permutations() {
        let (x, _) = planted(50, 3, 2);
        let s = shadow_columns(&x, &mut rng_for(1, 2, 3));
        for j in 0..3 {
            let mut a = x.column(j);
            let mut b = s.column(j);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn verdict_center_and_extremes() {
        assert_eq!(verdict(10, 20, 0.05, 30).unwrap(), Verdict::Tentative);
        assert_eq!(verdict(20, 20, 0.05, 30).unwrap(), Verdict::Confirmed);
        assert_eq!(verdict(18, 20, 0.05, 30).unwrap(), Verdict::Confirmed);
        assert_eq!(verdict(17, 20, 0.05, 30).unwrap(), Verdict::Tentative);
        assert_eq!(verdict(2, 20, 0.05, 30).unwrap(), Verdict::Rejected);
        assert_eq!(verdict(0, 20, 0.05, 1).unwrap(), Verdict::Rejected);
        assert!(verdict(21, 20, 0.05, 1).is_err());
    }

    #[test]
    fn small_selection_run() {
        let (x, y) = planted(150, 4, 11);
        let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
        let params = SelectParams {
            iterations: 8,
            alpha: 0.05,
            forest: ForestParams { trees: 30, seed: 4, ..Default::default() },
        };
        let r = shadow_select(&x, &y, &names, &params).unwrap();
        assert_eq!(r.features[0].verdict, Verdict::Confirmed);
        assert_eq!(r.ranking()[0].feature, "f0");
        assert_eq!(r, shadow_select(&x, &y, &names, &params).unwrap());
    }
}
