//! Ego networks from @-reply exchanges.
//!
//! Directed reply counts come from every record's `reply_edges`. When the
//! same `(from, to)` pair is listed by more than one record the largest
//! count is kept, so both endpoints may list an exchange without doubling
//! it. Two accounts are adjacent when either has replied to the other.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Corpus-wide reply graph with interned node ids.
#[derive(Debug, Clone, Default)]
pub struct ReplyGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<BTreeMap<usize, u32>>,
    adj: Vec<BTreeSet<usize>>,
    members: BTreeSet<String>,
}

impl ReplyGraph {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut g = ReplyGraph::default();
        for u in &corpus.users {
            g.members.insert(u.user_id.clone());
            g.intern(&u.user_id);
        }
        for u in &corpus.users {
            for e in &u.reply_edges {
                g.add(&e.from, &e.to, e.count);
            }
        }
        g
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.out.push(BTreeMap::new());
        self.adj.push(BTreeSet::new());
        i
    }

    fn add(&mut self, from: &str, to: &str, count: u32) {
        if from == to || count == 0 {
            return;
        }
        let (a, b) = (self.intern(from), self.intern(to));
        let c = self.out[a].entry(b).or_insert(0);
        *c = (*c).max(count);
        self.adj[a].insert(b);
        self.adj[b].insert(a);
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    /// Ego plus reply partners plus their partners, with induced edges.
    pub fn ego_graph(&self, ego_id: &str) -> Result<EgoGraph> {
        if !self.members.contains(ego_id) {
            return Err(Error::UnknownUser(ego_id.to_string()));
        }
        let ego = self.index[ego_id];
        let mut nodes = BTreeSet::new();
        nodes.insert(ego);
        for &v in &self.adj[ego] {
            nodes.insert(v);
            nodes.extend(self.adj[v].iter().copied());
        }
        // ego first, remaining nodes by name for a relabeling-stable layout
        let mut order: Vec<usize> = nodes.iter().copied().filter(|&v| v != ego).collect();
        order.sort_by(|a, b| self.names[*a].cmp(&self.names[*b]));
        order.insert(0, ego);
        let mut edges = Vec::new();
        for &a in &order {
            for (&b, &c) in &self.out[a] {
                if nodes.contains(&b) {
                    edges.push((self.names[a].clone(), self.names[b].clone(), c));
                }
            }
        }
        let names: Vec<String> = order.iter().map(|&i| self.names[i].clone()).collect();
        EgoGraph::from_parts(ego_id, names, edges)
    }
}

pub fn build_ego_graph(corpus: &Corpus, ego_id: &str) -> Result<EgoGraph> {
    ReplyGraph::from_corpus(corpus).ego_graph(ego_id)
}

/// Undirected ego graph with the directed reply volumes it was built from.
/// Node 0 is the ego.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoGraph {
    names: Vec<String>,
    adj: Vec<BTreeSet<usize>>,
    counts: BTreeMap<(usize, usize), u32>,
}

impl EgoGraph {
    /// `nodes` must contain the ego; edges whose endpoints are outside the
    /// node set, self-loops and zero counts are dropped.
    pub fn from_parts(ego: &str, nodes: Vec<String>, directed: Vec<(String, String, u32)>) -> Result<Self> {
        let mut names = vec![ego.to_string()];
        names.extend(nodes.into_iter().filter(|n| n != ego));
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != names.len() {
            return Err(Error::InvalidInput("duplicate node in ego graph".into()));
        }
        let mut adj = vec![BTreeSet::new(); names.len()];
        let mut counts = BTreeMap::new();
        for (from, to, c) in directed {
            let (Some(&a), Some(&b)) = (index.get(from.as_str()), index.get(to.as_str())) else {
                continue;
            };
            if a == b || c == 0 {
                continue;
            }
            let e = counts.entry((a, b)).or_insert(0);
            *e = (*e).max(c);
            adj[a].insert(b);
            adj[b].insert(a);
        }
        Ok(EgoGraph { names, adj, counts })
    }

    pub fn ego(&self) -> &str {
        &self.names[0]
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Undirected edges as name pairs, each ordered lexicographically.
    pub fn edges(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (a, ns) in self.adj.iter().enumerate() {
            for &b in ns {
                let (x, y) = (&self.names[a], &self.names[b]);
                out.insert(if x <= y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) });
            }
        }
        out
    }

    fn count(&self, a: usize, b: usize) -> u32 {
        self.counts.get(&(a, b)).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkFeatures {
    pub reciprocity: f64,
    pub prestige_ratio: f64,
    pub graph_density: f64,
    pub clustering_coefficient: f64,
    pub embeddedness: f64,
    pub ego_components: f64,
    pub two_hop_size: f64,
}

impl NetworkFeatures {
    pub const NAMES: [&'static str; 7] = [
        "reciprocity",
        "prestige_ratio",
        "graph_density",
        "clustering_coefficient",
        "embeddedness",
        "ego_components",
        "two_hop_neighborhood",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.reciprocity,
            self.prestige_ratio,
            self.graph_density,
            self.clustering_coefficient,
            self.embeddedness,
            self.ego_components,
            self.two_hop_size,
        ]
    }
}

/// Computes the seven ego-network features.
///
/// * reciprocity: share of the ego's neighbours with replies in both directions
/// * prestige ratio: replies received by the ego over `max(1, replies sent)`
/// * density: `2E / (n(n-1))`, 0 below two nodes
/// * clustering: mean local clustering over nodes of degree ≥ 2
/// * embeddedness: mean over neighbours `v` of `|N(ego) ∩ N(v)| / |N(ego) ∪ N(v) \ {ego, v}|`
/// * ego components: connected components once the ego is removed
/// * two-hop size: nodes other than the ego
pub fn ego_features(g: &EgoGraph) -> NetworkFeatures {
    let n = g.node_count();
    let ego = 0usize;
    let nbrs = &g.adj[ego];
    let deg = nbrs.len();

    let mutual = nbrs.iter().filter(|&&v| g.count(ego, v) > 0 && g.count(v, ego) > 0).count();
    let reciprocity = if deg == 0 { 0.0 } else { mutual as f64 / deg as f64 };

    let inbound: u64 = nbrs.iter().map(|&v| u64::from(g.count(v, ego))).sum();
    let outbound: u64 = nbrs.iter().map(|&v| u64::from(g.count(ego, v))).sum();
    let prestige_ratio = inbound as f64 / outbound.max(1) as f64;

    let e = g.edge_count();
    let graph_density = if n < 2 { 0.0 } else { 2.0 * e as f64 / (n * (n - 1)) as f64 };

    let mut cc_sum = 0.0;
    let mut cc_n = 0usize;
    for v in 0..n {
        let k = g.adj[v].len();
        if k < 2 {
            continue;
        }
        let ns: Vec<usize> = g.adj[v].iter().copied().collect();
        let mut links = 0usize;
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                links += usize::from(g.adj[a].contains(&b));
            }
        }
        cc_sum += links as f64 / (k * (k - 1) / 2) as f64;
        cc_n += 1;
    }
    let clustering_coefficient = if cc_n == 0 { 0.0 } else { cc_sum / cc_n as f64 };

    let embeddedness = if deg == 0 {
        0.0
    } else {
        let total: f64 = nbrs
            .iter()
            .map(|&v| {
                let nv = &g.adj[v];
                let inter = nbrs.intersection(nv).count();
                let union = nbrs.union(nv).filter(|&&w| w != ego && w != v).count();
                if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                }
            })
            .sum();
        total / deg as f64
    };

    let mut seen = vec![false; n];
    seen[ego] = true;
    let mut components = 0usize;
    for start in 1..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &g.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }

    NetworkFeatures {
        reciprocity,
        prestige_ratio,
        graph_density,
        clustering_coefficient,
        embeddedness,
        ego_components: components as f64,
        two_hop_size: (n - 1) as f64,
    }
}
