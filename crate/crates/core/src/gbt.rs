//! Second-order gradient-boosted regression trees for binary log-loss.
//!
//! Trees grow level by level with an exact greedy search over midpoints of
//! consecutive distinct feature values. Leaf weights and split gains use
//! the L1 soft-threshold `T(G) = sign(G) * max(|G| - alpha, 0)`:
//!
//! ```text
//! w    = -T(G) / (H + lambda)
//! gain = 1/2 [T(GL)^2/(HL+lambda) + T(GR)^2/(HR+lambda) - T(G)^2/(H+lambda)] - gamma
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{binary_labels, Matrix};

pub const MODEL_FORMAT: &str = "persona-signal-gbt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBTParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub min_child_hessian: f64,
    pub seed: u64,
}

impl Default for GBTParams {
    fn default() -> Self {
        GBTParams {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            alpha: 0.0,
            min_child_hessian: 1.0,
            seed: 0,
        }
    }
}

impl GBTParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.alpha >= 0.0 && self.min_child_hessian >= 0.0) {
            return bad("lambda, gamma, alpha and min_child_hessian must be non-negative");
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss `-y ln p - (1-y) ln(1-p)` at log-odds `z`, computed stably.
pub fn logistic_loss(y: f64, z: f64) -> f64 {
    let softplus = |v: f64| if v > 0.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
    y * softplus(-z) + (1.0 - y) * softplus(z)
}

/// First and second derivative of the logistic loss in the log-odds.
pub fn logistic_grad_hess(y: f64, yhat: f64) -> (f64, f64) {
    let p = sigmoid(yhat);
    (p - y, p * (1.0 - p))
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    g.signum() * (g.abs() - alpha).max(0.0)
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let t = soft_threshold(g, alpha);
    if t == 0.0 {
        0.0
    } else {
        -t / (h + lambda)
    }
}

fn leaf_score(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let t = soft_threshold(g, alpha);
    if t == 0.0 {
        0.0
    } else {
        t * t / (h + lambda)
    }
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64, alpha: f64) -> f64 {
    0.5 * (leaf_score(gl, hl, lambda, alpha) + leaf_score(gr, hr, lambda, alpha)
        - leaf_score(gl + gr, hl + hr, lambda, alpha))
        - gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Leaf { weight: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize, gain: f64 },
}

/// `value` is the hessian-weighted mean leaf weight of the training rows
/// reaching the node; `grad` and `hess` are their gradient and hessian sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub grad: f64,
    pub hess: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
    }

    /// Regularized objective with optimal leaves:
    /// `sum_leaves -1/2 T(G)^2/(H+lambda) + gamma * leaves`.
    pub fn structure_score(&self, lambda: f64, gamma: f64, alpha: f64) -> f64 {
        self.leaves().map(|n| -0.5 * leaf_score(n.grad, n.hess, lambda, alpha) + gamma).sum()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match t.nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTModel {
    pub params: GBTParams,
    pub schema: Vec<String>,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    /// Mean training log-loss after each round.
    pub train_loss: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl GBTModel {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch { expected: self.schema.len(), actual: x.len() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope<GBTModel> = serde_json::from_str(text)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model format {} v{}", env.format, env.version)));
        }
        Ok(env.model)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes()).map_err(|e| Error::io("<model>", e))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s).map_err(|e| Error::io("<model>", e))?;
        Self::from_json(&s)
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
// Fitting

/// Best split found for one open node while scanning one feature.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
}

fn better(a: &Candidate, b: &Option<Candidate>) -> bool {
    match b {
        None => true,
        Some(b) => a.gain > b.gain || (a.gain == b.gain && (a.feature, a.threshold) < (b.feature, b.threshold)),
    }
}

struct Open {
    node: usize,
    g: f64,
    h: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m < b {
        m
    } else {
        a
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    x: &Matrix,
    order: &[u32],
    f: usize,
    slot: &[usize],
    open: &[Open],
    g: &[f64],
    h: &[f64],
    p: &GBTParams,
) -> Vec<Option<Candidate>> {
    let k = open.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last = vec![f64::NAN; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    for &i in order {
        let i = i as usize;
        let s = slot[i];
        if s == usize::MAX {
            continue;
        }
        let v = x.get(i, f);
        if !last[s].is_nan() && v > last[s] {
            let (gr, hr) = (open[s].g - gl[s], open[s].h - hl[s]);
            if hl[s] >= p.min_child_hessian && hr >= p.min_child_hessian {
                let gain = split_gain(gl[s], hl[s], gr, hr, p.lambda, p.gamma, p.alpha);
                let c = Candidate { gain, feature: f, threshold: midpoint(last[s], v), gl: gl[s], hl: hl[s] };
                if best[s].is_none_or(|b| gain > b.gain) {
                    best[s] = Some(c);
                }
            }
        }
        gl[s] += g[i];
        hl[s] += h[i];
        last[s] = v;
    }
    best
}

fn grow_tree(x: &Matrix, orders: &[Vec<u32>], g: &[f64], h: &[f64], p: &GBTParams) -> (RegressionTree, Vec<usize>) {
    let n = x.rows();
    let (g0, h0) = (g.iter().sum::<f64>(), h.iter().sum::<f64>());
    let mut nodes = vec![TreeNode { kind: NodeKind::Leaf { weight: 0.0 }, grad: g0, hess: h0, value: 0.0 }];
    // row -> index into `open`, or MAX once its node is final
    let mut slot = vec![0usize; n];
    let mut node_of = vec![0usize; n];
    let mut open = vec![Open { node: 0, g: g0, h: h0 }];
    for _depth in 0..p.max_depth {
        if open.is_empty() {
            break;
        }
        let per_feature: Vec<Vec<Option<Candidate>>> =
            (0..x.cols()).into_par_iter().map(|f| scan_feature(x, &orders[f], f, &slot, &open, g, h, p)).collect();
        let mut next = Vec::new();
        let mut remap = vec![usize::MAX; open.len()];
        let mut children = vec![(0usize, 0usize, 0usize, 0.0f64); open.len()];
        for (s, o) in open.iter().enumerate() {
            let mut best: Option<Candidate> = None;
            for cand in per_feature.iter().filter_map(|v| v[s]) {
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            let Some(c) = best.filter(|c| c.gain > 0.0) else {
                continue;
            };
            let (l, r) = (nodes.len(), nodes.len() + 1);
            let (gr, hr) = (o.g - c.gl, o.h - c.hl);
            nodes.push(TreeNode { kind: NodeKind::Leaf { weight: 0.0 }, grad: c.gl, hess: c.hl, value: 0.0 });
            nodes.push(TreeNode { kind: NodeKind::Leaf { weight: 0.0 }, grad: gr, hess: hr, value: 0.0 });
            nodes[o.node].kind =
                NodeKind::Split { feature: c.feature, threshold: c.threshold, left: l, right: r, gain: c.gain };
            remap[s] = next.len();
            children[s] = (c.feature, l, r, c.threshold);
            next.push(Open { node: l, g: c.gl, h: c.hl });
            next.push(Open { node: r, g: gr, h: hr });
        }
        for i in 0..n {
            let s = slot[i];
            if s == usize::MAX {
                continue;
            }
            if remap[s] == usize::MAX {
                slot[i] = usize::MAX;
                continue;
            }
            let (f, l, r, t) = children[s];
            if x.get(i, f) <= t {
                slot[i] = remap[s];
                node_of[i] = l;
            } else {
                slot[i] = remap[s] + 1;
                node_of[i] = r;
            }
        }
        open = next;
    }
    // Accumulated child sums drift from a fresh sum by rounding only; the
    // leaf statistics are recomputed from the rows so weights and the
    // structure score see exactly the rows that reach each leaf.
    for n in nodes.iter_mut() {
        if matches!(n.kind, NodeKind::Leaf { .. }) {
            n.grad = 0.0;
            n.hess = 0.0;
        }
    }
    for i in 0..n {
        nodes[node_of[i]].grad += g[i];
        nodes[node_of[i]].hess += h[i];
    }
    for n in nodes.iter_mut() {
        if matches!(n.kind, NodeKind::Leaf { .. }) {
            let w = leaf_weight(n.grad, n.hess, p.lambda, p.alpha);
            n.kind = NodeKind::Leaf { weight: w };
            n.value = w;
        }
    }
    let mut tree = RegressionTree { nodes };
    fill_values(&mut tree, 0);
    (tree, node_of)
}

/// Post-order pass setting internal node values and hessian sums.
fn fill_values(t: &mut RegressionTree, i: usize) -> (f64, f64) {
    match t.nodes[i].kind {
        NodeKind::Leaf { weight } => (t.nodes[i].hess, weight),
        NodeKind::Split { left, right, .. } => {
            let (hl, vl) = fill_values(t, left);
            let (hr, vr) = fill_values(t, right);
            let hs = hl + hr;
            let v = if hs > 0.0 { (hl * vl + hr * vr) / hs } else { 0.5 * (vl + vr) };
            let gs = t.nodes[left].grad + t.nodes[right].grad;
            let node = &mut t.nodes[i];
            node.hess = hs;
            node.grad = gs;
            node.value = v;
            (hs, v)
        }
    }
}

fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.cols())
        .into_par_iter()
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
            idx
        })
        .collect()
}

pub fn fit(x: &Matrix, y: &[f64], schema: &[String], params: &GBTParams) -> Result<GBTModel> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if schema.len() != x.cols() {
        return Err(Error::SchemaMismatch { expected: x.cols(), actual: schema.len() });
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput("training matrix contains non-finite values".into()));
    }
    binary_labels(y)?;
    let n = x.rows();
    let prior = y.iter().sum::<f64>() / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let orders = presort(x);
    let mut pred = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut train_loss = Vec::with_capacity(params.rounds);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            (g[i], h[i]) = logistic_grad_hess(y[i], pred[i]);
        }
        let (tree, node_of) = grow_tree(x, &orders, &g, &h, params);
        for i in 0..n {
            if let NodeKind::Leaf { weight } = tree.nodes[node_of[i]].kind {
                pred[i] += params.learning_rate * weight;
            }
        }
        train_loss.push(y.iter().zip(&pred).map(|(&yi, &z)| logistic_loss(yi, z)).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    Ok(GBTModel { params: *params, schema: schema.to_vec(), base_score, trees, train_loss })
}

pub fn predict_logodds(model: &GBTModel, x: &[f64]) -> Result<f64> {
    model.check(x)?;
    let eta = model.params.learning_rate;
    Ok(model.base_score + model.trees.iter().map(|t| eta * t.predict(x)).sum::<f64>())
}

pub fn predict_proba(model: &GBTModel, x: &[f64]) -> Result<f64> {
    Ok(sigmoid(predict_logodds(model, x)?))
}

// ---------------------------------------------------------------------------
// Explanation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waterfall {
    pub bias: f64,
    /// One entry per schema feature, largest |delta| first.
    pub contributions: Vec<Contribution>,
    pub final_logodds: f64,
    pub probability: f64,
}

impl Waterfall {
    /// `(feature, delta, running total)` rows starting from the bias.
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        let mut total = self.bias;
        self.contributions
            .iter()
            .map(|c| {
                total += c.delta;
                (c.feature.clone(), c.delta, total)
            })
            .collect()
    }
}

/// Two-decimal bar label, e.g. `-1.41`.
pub fn bar_label(delta: f64) -> String {
    let s = format!("{delta:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Path attribution: every split on the route to a leaf credits its feature
/// with the change in node value between parent and child.
pub fn explain(model: &GBTModel, x: &[f64]) -> Result<Waterfall> {
    model.check(x)?;
    let eta = model.params.learning_rate;
    let mut delta = vec![0.0; model.schema.len()];
    let mut bias = model.base_score;
    for t in &model.trees {
        bias += eta * t.nodes[0].value;
        let mut i = 0;
        while let NodeKind::Split { feature, threshold, left, right, .. } = t.nodes[i].kind {
            let child = if x[feature] <= threshold { left } else { right };
            delta[feature] += eta * (t.nodes[child].value - t.nodes[i].value);
            i = child;
        }
    }
    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&a, &b| delta[b].abs().total_cmp(&delta[a].abs()).then(a.cmp(&b)));
    let contributions: Vec<Contribution> =
        order.into_iter().map(|j| Contribution { feature: model.schema[j].clone(), delta: delta[j] }).collect();
    let final_logodds = predict_logodds(model, x)?;
    Ok(Waterfall { bias, contributions, final_logodds, probability: sigmoid(final_logodds) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn grad_hess_examples() {
        assert_eq!(logistic_grad_hess(1.0, 0.0), (-0.5, 0.25));
        assert_eq!(logistic_grad_hess(0.0, 0.0), (0.5, 0.25));
        let (g, h) = logistic_grad_hess(1.0, 2.0);
        assert!((g + 0.119_202_922).abs() < 1e-8);
        assert!((h - 0.104_993_585).abs() < 1e-8);
    }

    #[test]
    fn weight_and_gain_examples() {
        assert_eq!(leaf_weight(-2.0, 1.0, 1.0, 0.0), 1.0);
        assert_eq!(leaf_weight(0.0, 1.0, 1.0, 0.0), 0.0);
        assert_eq!(leaf_weight(-0.5, 1.0, 1.0, 0.5), 0.0);
        assert_eq!(split_gain(-2.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.0), 2.0);
        assert!((split_gain(1.0, 2.0, 1.0, 2.0, 1.0, 0.3, 0.0) - (0.5 * (2.0 / 3.0 - 0.8) - 0.3)).abs() < 1e-12);
        assert!(split_gain(-2.0, 1.0, 2.0, 1.0, 1.0, 10.0, 0.0) < 0.0);
    }

    #[test]
    fn link_examples() {
        assert!((sigmoid(0.31) - 0.576_885).abs() < 1e-6);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(bar_label(-1.414), "-1.41");
    }

    #[test]
    fn zero_information_features() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let y = [0.0, 1.0, 0.0, 1.0];
        let m = fit(&x, &y, &names(1), &GBTParams { rounds: 1, ..Default::default() }).unwrap();
        assert_eq!(m.base_score, 0.0);
        assert!(m.trees[0].leaves().all(|l| l.value == 0.0));
        assert_eq!(predict_logodds(&m, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn separable_stump() {
        let xs = [0.0, 1.0, 2.0, 3.0, 7.0, 8.0, 9.0, 10.0];
        let x = Matrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let y = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let p = GBTParams {
            rounds: 1,
            max_depth: 1,
            lambda: 0.0,
            learning_rate: 1.0,
            min_child_hessian: 0.0,
            ..Default::default()
        };
        let m = fit(&x, &y, &names(1), &p).unwrap();
        let NodeKind::Split { threshold, left, right, .. } = m.trees[0].nodes[0].kind else {
            panic!("expected a split")
        };
        assert_eq!(threshold, 5.0);
        // at base score 0 every row has g = p - y = ±0.5, h = 0.25
        assert!((m.trees[0].nodes[left].value - (-2.0 / 1.0)).abs() < 1e-12);
        assert!((m.trees[0].nodes[right].value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_and_schema_errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(fit(&x, &[1.0, 1.0], &names(1), &GBTParams::default()), Err(Error::SingleClass)));
        let m = fit(&x, &[0.0, 1.0], &names(1), &GBTParams { rounds: 2, ..Default::default() }).unwrap();
        assert!(matches!(predict_logodds(&m, &[1.0, 2.0]), Err(Error::SchemaMismatch { .. })));
        assert!(explain(&m, &[]).is_err());
    }

    #[test]
    fn empty_trees_predict_prior() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let y = [1.0, 0.0, 0.0, 0.0];
        let m = fit(&x, &y, &names(1), &GBTParams { rounds: 3, ..Default::default() }).unwrap();
        assert!((predict_proba(&m, &[0.0]).unwrap() - 0.25).abs() < 1e-12);
        let w = explain(&m, &[0.0]).unwrap();
        assert!(w.contributions.iter().all(|c| c.delta == 0.0));
        assert!((w.bias - w.final_logodds).abs() < 1e-12);
    }

    fn random_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let mut rng = rng_for(seed, 0, 0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> =
            rows.iter().map(|r| f64::from(r[0] + 0.5 * r[1 % d] + rng.random_range(-1.0..1.0) > 0.0)).collect();
        y[0] = 0.0;
        y[1] = 1.0;
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn loss_non_increasing() {
        for seed in 0..5 {
            let (x, y) = random_data(seed, 120, 4);
            let m = fit(&x, &y, &names(4), &GBTParams { rounds: 40, ..Default::default() }).unwrap();
            for w in m.train_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", w);
            }
        }
    }

    #[test]
    fn roundtrip_and_determinism() {
        let (x, y) = random_data(3, 80, 3);
        let p = GBTParams { rounds: 15, ..Default::default() };
        let m = fit(&x, &y, &names(3), &p).unwrap();
        let back = GBTModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let m1 = one.install(|| fit(&x, &y, &names(3), &p).unwrap());
        assert_eq!(m, m1);
        assert!(GBTModel::from_json(r#"{"format":"other","version":1,"model":null}"#).is_err());
    }

    #[test]
    fn leaves_respect_min_child_hessian() {
        let (x, y) = random_data(9, 60, 2);
        let p = GBTParams { rounds: 5, min_child_hessian: 2.0, ..Default::default() };
        let m = fit(&x, &y, &names(2), &p).unwrap();
        for t in &m.trees {
            if t.nodes.len() > 1 {
                assert!(t.leaves().all(|l| l.hess >= 2.0 - 1e-9));
            }
            assert!(t.depth() <= p.max_depth);
        }
    }

    proptest! {
        #[test]
        fn finite_differences(y in 0u8..2, z in -8.0f64..8.0) {
            let y = f64::from(y);
            let e = 1e-4;
            let (g, h) = logistic_grad_hess(y, z);
            let fd_g = (logistic_loss(y, z + e) - logistic_loss(y, z - e)) / (2.0 * e);
            let (gp, _) = logistic_grad_hess(y, z + e);
            let (gm, _) = logistic_grad_hess(y, z - e);
            let fd_h = (gp - gm) / (2.0 * e);
            prop_assert!((g - fd_g).abs() < 1e-6);
            prop_assert!((h - fd_h).abs() < 1e-6);
        }

        #[test]
        fn explanation_is_additive(seed in 0u64..1000, probe in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let (x, y) = random_data(seed, 50, 3);
            let m = fit(&x, &y, &names(3), &GBTParams { rounds: 10, max_depth: 3, ..Default::default() }).unwrap();
            let w = explain(&m, &probe).unwrap();
            let sum = w.bias + w.contributions.iter().map(|c| c.delta).sum::<f64>();
            prop_assert!((sum - predict_logodds(&m, &probe).unwrap()).abs() < 1e-9);
            prop_assert!((w.probability - sigmoid(w.final_logodds)).abs() < 1e-15);
        }
    }
}
