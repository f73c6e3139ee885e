//! Pruning configurations, views and configuration families.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge_set::{EdgeId, EdgeSet, NodeId};
use crate::error::{Error, Result};
use crate::graph::{AttributionGraph, NodeKind};
use crate::influence::InfluenceMap;

/// A pair of cumulative-influence keep fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningConfig {
    #[serde(default)]
    pub id: String,
    pub node_keep: f64,
    pub edge_keep: f64,
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")))
    }
}

impl PruningConfig {
    pub fn new(node_keep: f64, edge_keep: f64) -> Result<Self> {
        let cfg = Self { id: Self::default_id(node_keep, edge_keep), node_keep, edge_keep };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn default_id(node_keep: f64, edge_keep: f64) -> String {
        format!("n{node_keep}-e{edge_keep}")
    }

    pub fn check(&self) -> Result<()> {
        check_fraction("node_keep", self.node_keep)?;
        check_fraction("edge_keep", self.edge_keep)
    }

    /// Componentwise `≤`: both keep fractions no larger than `other`'s.
    pub fn is_tighter_or_equal(&self, other: &PruningConfig) -> bool {
        self.node_keep <= other.node_keep && self.edge_keep <= other.edge_keep
    }
}

impl fmt::Display for PruningConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.node_keep, self.edge_keep)
    }
}

/// One pruned view of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub config: PruningConfig,
    /// Sorted node ids that survive.
    pub nodes: Vec<NodeId>,
    pub edges: EdgeSet,
    graph: u64,
}

impl View {
    pub fn graph_fingerprint(&self) -> u64 {
        self.graph
    }
}

pub(crate) fn check_same_graph(views: &[View]) -> Result<()> {
    match views.split_first() {
        Some((first, rest)) if rest.iter().any(|v| v.graph != first.graph) => Err(Error::MixedGraphs),
        _ => Ok(()),
    }
}

/// Length of the shortest prefix of `prefix_sums` (cumulative, descending
/// values) reaching `keep` of the total. A keep of 1 takes everything,
/// zero-influence tail included.
pub(crate) fn minimal_prefix_len(prefix_sums: &[f64], keep: f64) -> usize {
    let n = prefix_sums.len();
    if keep >= 1.0 || n == 0 {
        return n;
    }
    let target = keep * prefix_sums[n - 1];
    if target <= 0.0 {
        return 0;
    }
    (prefix_sums.partition_point(|&c| c < target) + 1).min(n)
}

/// Sorts `ids` by descending score, ties broken by ascending id.
pub(crate) fn rank_by_score<T: Copy + Ord>(ids: &mut [T], score: impl Fn(T) -> f64) {
    ids.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
}

fn prefix_sums(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Rankings shared by every configuration applied to one graph.
///
/// A view keeps the top nodes reaching `node_keep` of the prunable node
/// influence (tokens and logits are always kept), and the top edges reaching
/// `edge_keep` of the whole graph's edge influence, restricted to edges whose
/// endpoints both survive. Nodes left without edges are dropped, anchors
/// excepted. Both thresholds are measured on one fixed ranking, so tightening
/// both fractions can only shrink a view.
pub struct Pruner<'g> {
    graph: &'g AttributionGraph,
    node_order: Vec<NodeId>,
    node_prefix: Vec<f64>,
    edge_order: Vec<EdgeId>,
    edge_prefix: Vec<f64>,
}

fn is_anchor(g: &AttributionGraph, n: NodeId) -> bool {
    matches!(g.node(n).kind, NodeKind::Logit | NodeKind::Token)
}

impl<'g> Pruner<'g> {
    pub fn new(graph: &'g AttributionGraph, inf: &InfluenceMap) -> Self {
        let mut node_order: Vec<NodeId> = graph.node_ids().filter(|&n| !is_anchor(graph, n)).collect();
        rank_by_score(&mut node_order, |n| inf.node(n));
        let node_prefix = prefix_sums(node_order.iter().map(|&n| inf.node(n)));

        let mut edge_order: Vec<EdgeId> = graph.edge_ids().collect();
        rank_by_score(&mut edge_order, |e| inf.edge(e));
        let edge_prefix = prefix_sums(edge_order.iter().map(|&e| inf.edge(e)));
        Self { graph, node_order, node_prefix, edge_order, edge_prefix }
    }

    pub fn apply(&self, cfg: &PruningConfig) -> Result<View> {
        cfg.check()?;
        let g = self.graph;
        let mut keep_node: Vec<bool> = g.node_ids().map(|n| is_anchor(g, n)).collect();
        let n_kept = minimal_prefix_len(&self.node_prefix, cfg.node_keep);
        for &n in &self.node_order[..n_kept] {
            keep_node[n.index()] = true;
        }

        let e_kept = minimal_prefix_len(&self.edge_prefix, cfg.edge_keep);
        let mut edges: Vec<EdgeId> = self.edge_order[..e_kept]
            .iter()
            .copied()
            .filter(|&e| {
                let (s, d) = g.endpoints(e);
                keep_node[s.index()] && keep_node[d.index()]
            })
            .collect();
        edges.sort_unstable();

        let mut touched: Vec<bool> = g.node_ids().map(|n| is_anchor(g, n)).collect();
        for &e in &edges {
            let (s, d) = g.endpoints(e);
            touched[s.index()] = true;
            touched[d.index()] = true;
        }
        let nodes = g.node_ids().filter(|n| touched[n.index()]).collect();
        Ok(View {
            config: cfg.clone(),
            nodes,
            edges: EdgeSet::from_sorted_unchecked(edges),
            graph: g.fingerprint(),
        })
    }

    /// Applies every config; views come back in config order regardless of
    /// scheduling.
    pub fn apply_all(&self, configs: &[PruningConfig]) -> Result<Vec<View>> {
        configs.par_iter().map(|c| self.apply(c)).collect()
    }
}

pub fn apply_config(g: &AttributionGraph, inf: &InfluenceMap, cfg: &PruningConfig) -> Result<View> {
    Pruner::new(g, inf).apply(cfg)
}

/// Cartesian product of node and edge levels, node-major.
pub fn grid_family(node_levels: &[f64], edge_levels: &[f64]) -> Result<Vec<PruningConfig>> {
    if node_levels.is_empty() || edge_levels.is_empty() {
        return Err(Error::InvalidConfig("grid levels must be nonempty".into()));
    }
    node_levels
        .iter()
        .flat_map(|&n| edge_levels.iter().map(move |&e| PruningConfig::new(n, e)))
        .collect()
}

/// Pairs the i-th node level with the (k-1-i)-th edge level, so node and
/// edge thresholds move in opposite directions across the family.
pub fn non_nested_family(node_levels: &[f64], edge_levels: &[f64]) -> Result<Vec<PruningConfig>> {
    if node_levels.len() != edge_levels.len() {
        return Err(Error::InvalidConfig(format!(
            "crossed family needs equal level counts, got {} node and {} edge levels",
            node_levels.len(),
            edge_levels.len()
        )));
    }
    if node_levels.is_empty() {
        return Err(Error::InvalidConfig("crossed family needs at least one level".into()));
    }
    for (name, levels) in [("node", node_levels), ("edge", edge_levels)] {
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!("{name} levels must be strictly ascending")));
        }
    }
    let k = node_levels.len();
    (0..k).map(|i| PruningConfig::new(node_levels[i], edge_levels[k - 1 - i])).collect()
}

/// Evenly spaced levels from `low` to `high` inclusive.
pub fn linspace(low: f64, high: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![low],
        _ => (0..count).map(|i| low + (high - low) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NestingCheck {
    /// View indices ordered so each edge set contains the previous one.
    Chain(Vec<usize>),
    /// Two views whose edge sets are not ⊆-comparable.
    Incomparable(usize, usize),
}

impl NestingCheck {
    pub fn is_chain(&self) -> bool {
        matches!(self, NestingCheck::Chain(_))
    }
}

/// Decides whether the views' edge sets form a ⊆-chain.
pub fn is_nested_chain(views: &[View]) -> Result<NestingCheck> {
    if views.len() < 2 {
        return Err(Error::TooFewViews { required: 2, got: views.len() });
    }
    check_same_graph(views)?;
    let mut order: Vec<usize> = (0..views.len()).collect();
    order.sort_by_key(|&i| views[i].edges.len());
    for w in order.windows(2) {
        // With |A| ≤ |B|, A ⊄ B means neither contains the other.
        if !views[w[0]].edges.is_subset(&views[w[1]].edges) {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Ok(NestingCheck::Incomparable(a, b));
        }
    }
    Ok(NestingCheck::Chain(order))
}
