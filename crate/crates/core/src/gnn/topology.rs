use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Which AP pairs exchange messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyRule {
    Full,
    /// Mutualized k-nearest neighbours by AP distance: an edge exists if
    /// either endpoint picks the other. Ties go to the lower AP index.
    KNearest(usize),
}

impl std::fmt::Display for TopologyRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TopologyRule::Full => write!(f, "full"),
            TopologyRule::KNearest(k) => write!(f, "knn:{k}"),
        }
    }
}

impl std::str::FromStr for TopologyRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(TopologyRule::Full),
            _ => s
                .strip_prefix("knn:")
                .and_then(|k| k.parse().ok())
                .map(TopologyRule::KNearest)
                .ok_or_else(|| format!("unknown topology {s:?} (expected `full` or `knn:<k>`)")),
        }
    }
}

/// Directed AP graph. Edge `e` carries a message from `sources[e]` to
/// `targets[e]`; edges are sorted by (target, source).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTopology {
    n_nodes: usize,
    sources: Arc<[usize]>,
    targets: Vec<usize>,
    features: Vec<f64>,
    incoming: Arc<[Vec<usize>]>,
}

impl GraphTopology {
    /// Builds from undirected-or-directed edges `(m, n, e_mn)`. Self-loops
    /// and duplicates are rejected.
    pub fn from_edges(n_nodes: usize, mut edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        edges.sort_by_key(|a| (a.1, a.0));
        for w in edges.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidScenario(format!("duplicate edge {}->{}", w[0].0, w[0].1)));
            }
        }
        if let Some(&(m, n, _)) = edges.iter().find(|(m, n, _)| m == n || *m >= n_nodes || *n >= n_nodes) {
            return Err(Error::InvalidScenario(format!("bad edge {m}->{n} for {n_nodes} nodes")));
        }
        let mut incoming = vec![Vec::new(); n_nodes];
        for (e, &(_, n, _)) in edges.iter().enumerate() {
            incoming[n].push(e);
        }
        Ok(GraphTopology {
            n_nodes,
            sources: edges.iter().map(|e| e.0).collect(),
            targets: edges.iter().map(|e| e.1).collect(),
            features: edges.iter().map(|e| e.2).collect(),
            incoming: incoming.into(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    /// `(source, target, feature)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize, f64) {
        (self.sources[e], self.targets[e], self.features[e])
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_edges()).map(|e| self.edge(e))
    }

    /// Neighbours whose messages reach `n`, in edge order.
    pub fn neighbors(&self, n: usize) -> Vec<usize> {
        self.incoming[n].iter().map(|&e| self.sources[e]).collect()
    }

    pub(crate) fn edge_sources(&self) -> Arc<[usize]> {
        self.sources.clone()
    }

    pub(crate) fn incoming_edges(&self) -> Arc<[Vec<usize>]> {
        self.incoming.clone()
    }

    pub(crate) fn edge_features(&self) -> &[f64] {
        &self.features
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_nodes {
            return Err(Error::dim("permuted", format!("{} labels for {} nodes", perm.len(), self.n_nodes)));
        }
        let edges = self.edges().map(|(m, n, f)| (perm[m], perm[n], f)).collect();
        GraphTopology::from_edges(self.n_nodes, edges)
    }
}

/// AP graph of `scenario` under `rule`; `e_mn` is the AP distance over the
/// area diagonal.
pub fn build_graph(scenario: &Scenario, rule: TopologyRule) -> Result<GraphTopology> {
    let aps = &scenario.ap_positions;
    let n = aps.len();
    let diag = scenario.area.diagonal();
    let feature = |a: usize, b: usize| aps[a].distance(aps[b]) / diag;
    let mut adjacent = vec![vec![false; n]; n];
    match rule {
        TopologyRule::Full => {
            for (a, row) in adjacent.iter_mut().enumerate() {
                for (b, x) in row.iter_mut().enumerate() {
                    *x = a != b;
                }
            }
        }
        TopologyRule::KNearest(k) => {
            if k == 0 || k >= n {
                return Err(Error::InvalidScenario(format!("k_nearest({k}) needs 0 < k < {n}")));
            }
            for a in 0..n {
                let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
                others.sort_by(|&x, &y| feature(a, x).total_cmp(&feature(a, y)).then(x.cmp(&y)));
                for &b in &others[..k] {
                    adjacent[a][b] = true;
                    adjacent[b][a] = true;
                }
            }
        }
    }
    let mut edges = Vec::new();
    for (a, row) in adjacent.iter().enumerate() {
        for (b, &on) in row.iter().enumerate() {
            if on {
                edges.push((a, b, feature(a, b)));
            }
        }
    }
    GraphTopology::from_edges(n, edges)
}
