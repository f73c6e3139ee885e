//! Backward influence propagation, influence retained and per-logit
//! influence distributions.
//!
//! Incoming absolute weights are normalized per destination node,
//! `Â(u,v) = |w(u,v)| / Σ_x |w(x,v)|`, and influence flows backwards from
//! seeded logits: `I(v) = seed(v) + Σ_{(v,x)} Â(v,x)·I(x)`. The recursion is
//! solved exactly in reverse topological order. Edge influence is
//! `Â(u,v)·I(v)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::edge_set::{EdgeId, EdgeSet, NodeId};
use crate::error::{Error, Result};
use crate::graph::{AttributionGraph, NodeKind};

/// Smoothing mass added to every logit before normalizing a distribution.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Seed value per logit node. Logits not listed get `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitSeeds {
    #[serde(default = "one")]
    pub default: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for LogitSeeds {
    fn default() -> Self {
        Self { default: 1.0, overrides: BTreeMap::new() }
    }
}

impl LogitSeeds {
    fn seed_vector(&self, g: &AttributionGraph) -> Result<Vec<f64>> {
        for (id, v) in &self.overrides {
            match g.node_id(id) {
                Some(n) if g.node(n).kind == NodeKind::Logit => {}
                _ => return Err(Error::InvalidArgument(format!("seed override for non-logit node {id}"))),
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidArgument(format!("logit seed for {id} must be finite and nonnegative")));
            }
        }
        if !(self.default.is_finite() && self.default >= 0.0) {
            return Err(Error::InvalidArgument("default logit seed must be finite and nonnegative".into()));
        }
        Ok(g.node_ids()
            .map(|n| {
                let node = g.node(n);
                if node.kind == NodeKind::Logit {
                    self.overrides.get(&node.id).copied().unwrap_or(self.default)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMap {
    node_influence: Vec<f64>,
    edge_influence: Vec<f64>,
    total_edge_influence: f64,
}

impl InfluenceMap {
    pub fn node(&self, id: NodeId) -> f64 {
        self.node_influence[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> f64 {
        self.edge_influence[id.index()]
    }

    /// Per-node influence indexed by [`NodeId`].
    pub fn node_influence(&self) -> &[f64] {
        &self.node_influence
    }

    /// Per-edge influence indexed by [`EdgeId`].
    pub fn edge_influence(&self) -> &[f64] {
        &self.edge_influence
    }

    pub fn total_edge_influence(&self) -> f64 {
        self.total_edge_influence
    }

    pub fn node_map<'g>(&self, g: &'g AttributionGraph) -> BTreeMap<&'g str, f64> {
        g.node_ids().map(|n| (g.node(n).id.as_str(), self.node(n))).collect()
    }
}

/// `Â` for every edge, indexed by [`EdgeId`].
pub fn normalized_weights(g: &AttributionGraph) -> Vec<f64> {
    let mut in_sum = vec![0.0; g.node_count()];
    for e in g.edge_ids() {
        in_sum[g.endpoints(e).1.index()] += g.edge(e).weight.abs();
    }
    g.edge_ids()
        .map(|e| {
            let total = in_sum[g.endpoints(e).1.index()];
            if total > 0.0 {
                g.edge(e).weight.abs() / total
            } else {
                0.0
            }
        })
        .collect()
}

fn propagate(g: &AttributionGraph, normalized: &[f64], seeds: &[f64]) -> InfluenceMap {
    let mut node_influence = seeds.to_vec();
    for &v in g.topological_order().iter().rev() {
        let downstream: f64 = g
            .outgoing(v)
            .iter()
            .map(|&e| normalized[e.index()] * node_influence[g.endpoints(e).1.index()])
            .sum();
        node_influence[v.index()] += downstream;
    }
    let edge_influence: Vec<f64> = g
        .edge_ids()
        .map(|e| normalized[e.index()] * node_influence[g.endpoints(e).1.index()])
        .collect();
    let total_edge_influence = edge_influence.iter().sum();
    InfluenceMap { node_influence, edge_influence, total_edge_influence }
}

/// Influence with every logit seeded at 1.
pub fn compute_influence(g: &AttributionGraph) -> InfluenceMap {
    compute_influence_with_seeds(g, &LogitSeeds::default()).expect("default seeds are valid")
}

pub fn compute_influence_with_seeds(g: &AttributionGraph, seeds: &LogitSeeds) -> Result<InfluenceMap> {
    let seeds = seeds.seed_vector(g)?;
    Ok(propagate(g, &normalized_weights(g), &seeds))
}

/// Φ(S)/Φ(E) with Φ the sum of absolute edge weights.
pub fn influence_retained(g: &AttributionGraph, subset: &EdgeSet) -> Result<f64> {
    let total = g.total_abs_weight();
    if total <= 0.0 {
        return Err(Error::UndefinedInfluenceRetained);
    }
    if subset.len() == g.edge_count() {
        return Ok(1.0);
    }
    let phi: f64 = subset.iter().map(|e| g.edge(e).weight.abs()).sum();
    Ok((phi / total).min(1.0))
}

/// Probability mass per logit id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogitDistribution {
    pub probs: BTreeMap<String, f64>,
}

impl LogitDistribution {
    pub fn get(&self, logit: &str) -> Option<f64> {
        self.probs.get(logit).copied()
    }
}

/// Edge influence computed separately for each logit (seed 1 at that logit
/// only), so the flow an edge carries toward each output can be read off.
#[derive(Debug, Clone)]
pub struct PerLogitInfluence {
    logits: Vec<(String, Vec<f64>)>,
}

impl PerLogitInfluence {
    pub fn new(g: &AttributionGraph) -> Self {
        let normalized = normalized_weights(g);
        let logits = g
            .logits()
            .map(|l| {
                let mut seeds = vec![0.0; g.node_count()];
                seeds[l.index()] = 1.0;
                (g.node(l).id.clone(), propagate(g, &normalized, &seeds).edge_influence)
            })
            .collect();
        Self { logits }
    }

    pub fn distribution(&self, subset: &EdgeSet, epsilon: f64) -> LogitDistribution {
        let masses: Vec<f64> = self
            .logits
            .iter()
            .map(|(_, inf)| subset.iter().map(|e| inf[e.index()]).sum::<f64>() + epsilon)
            .collect();
        let total: f64 = masses.iter().sum();
        let n = self.logits.len() as f64;
        let probs = self
            .logits
            .iter()
            .zip(masses)
            .map(|((id, _), m)| (id.clone(), if total > 0.0 { m / total } else { 1.0 / n }))
            .collect();
        LogitDistribution { probs }
    }
}

/// p_S: the share of the subset's logit-directed influence landing on each
/// logit, smoothed by `epsilon` per logit.
pub fn logit_distribution(g: &AttributionGraph, subset: &EdgeSet, epsilon: f64) -> LogitDistribution {
    PerLogitInfluence::new(g).distribution(subset, epsilon)
}

/// D_KL(p ‖ q) in nats.
pub fn kl_divergence(p: &LogitDistribution, q: &LogitDistribution) -> Result<f64> {
    if p.probs.len() != q.probs.len() || p.probs.keys().zip(q.probs.keys()).any(|(a, b)| a != b) {
        return Err(Error::SupportMismatch);
    }
    let kl: f64 = p
        .probs
        .values()
        .zip(q.probs.values())
        .map(|(&pi, &qi)| if pi > 0.0 { pi * (pi / qi).ln() } else { 0.0 })
        .sum();
    // Rounding can push a true zero a hair below it.
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, GraphDocument, Node};

    fn node(id: &str, kind: NodeKind) -> Node {
        Node { id: id.into(), kind, layer: 0, position: 0, label: None, planted_tier: None }
    }

    fn graph(nodes: &[(&str, NodeKind)], edges: &[(&str, &str, f64)]) -> AttributionGraph {
        AttributionGraph::from_document(GraphDocument {
            meta: Default::default(),
            nodes: nodes.iter().map(|(id, k)| node(id, *k)).collect(),
            edges: edges
                .iter()
                .map(|(s, d, w)| Edge { src: (*s).into(), dst: (*d).into(), weight: *w, planted_tier: None })
                .collect(),
        })
        .unwrap()
    }

    fn ids(g: &AttributionGraph, keys: &[(&str, &str)]) -> EdgeSet {
        keys.iter().map(|(s, d)| g.edge_id(s, d).unwrap()).collect()
    }

    #[test]
    fn two_edge_chain_hand_solution() {
        let g = graph(
            &[("t", NodeKind::Token), ("f", NodeKind::Feature), ("l", NodeKind::Logit)],
            &[("t", "f", 2.0), ("f", "l", -3.0)],
        );
        let inf = compute_influence(&g);
        assert_eq!(inf.node(g.node_id("f").unwrap()), 1.0);
        assert_eq!(inf.node(g.node_id("l").unwrap()), 1.0);
        for e in g.edge_ids() {
            assert_eq!(inf.edge(e), 1.0);
        }
        assert_eq!(inf.total_edge_influence(), 2.0);
    }

    #[test]
    fn dead_end_sink_carries_no_influence() {
        let g = graph(
            &[("t", NodeKind::Token), ("a", NodeKind::Feature), ("b", NodeKind::Feature), ("l", NodeKind::Logit)],
            &[("t", "a", 1.0), ("a", "b", 2.0)],
        );
        let inf = compute_influence(&g);
        for n in g.node_ids() {
            let expected = if g.node(n).kind == NodeKind::Logit { 1.0 } else { 0.0 };
            assert_eq!(inf.node(n), expected);
        }
        assert_eq!(inf.total_edge_influence(), 0.0);
    }

    #[test]
    fn seed_overrides_scale_flow() {
        let g = graph(
            &[("t", NodeKind::Token), ("l1", NodeKind::Logit), ("l2", NodeKind::Logit)],
            &[("t", "l1", 1.0), ("t", "l2", 1.0)],
        );
        let seeds = LogitSeeds { default: 1.0, overrides: [("l2".to_string(), 3.0)].into() };
        let inf = compute_influence_with_seeds(&g, &seeds).unwrap();
        assert_eq!(inf.node(g.node_id("t").unwrap()), 4.0);
        let bad = LogitSeeds { default: 1.0, overrides: [("t".to_string(), 3.0)].into() };
        assert!(compute_influence_with_seeds(&g, &bad).is_err());
    }

    #[test]
    fn influence_retained_arithmetic() {
        let g = graph(
            &[("t", NodeKind::Token), ("a", NodeKind::Feature), ("l", NodeKind::Logit)],
            &[("t", "a", 1.0), ("a", "l", -1.0), ("t", "l", 2.0)],
        );
        assert_eq!(influence_retained(&g, &g.all_edges()).unwrap(), 1.0);
        assert_eq!(influence_retained(&g, &EdgeSet::new()).unwrap(), 0.0);
        assert_eq!(influence_retained(&g, &ids(&g, &[("t", "l")])).unwrap(), 0.5);

        let empty = graph(&[("l", NodeKind::Logit)], &[]);
        assert!(matches!(influence_retained(&empty, &EdgeSet::new()), Err(Error::UndefinedInfluenceRetained)));
    }

    #[test]
    fn single_logit_distribution_is_degenerate() {
        let g = graph(
            &[("t", NodeKind::Token), ("a", NodeKind::Feature), ("l", NodeKind::Logit)],
            &[("t", "a", 1.0), ("a", "l", 1.0)],
        );
        let p = logit_distribution(&g, &ids(&g, &[("a", "l")]), DEFAULT_EPSILON);
        assert_eq!(p.get("l"), Some(1.0));
    }

    #[test]
    fn empty_subset_distribution_is_uniform() {
        let g = graph(
            &[("t", NodeKind::Token), ("l1", NodeKind::Logit), ("l2", NodeKind::Logit), ("l3", NodeKind::Logit)],
            &[("t", "l1", 5.0), ("t", "l2", 1.0)],
        );
        let p = logit_distribution(&g, &EdgeSet::new(), DEFAULT_EPSILON);
        for v in p.probs.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_logit_fan_splits_evenly() {
        // A = a->l1 and B = b->l2, each carrying influence 1 to its own logit.
        let g = graph(
            &[
                ("t", NodeKind::Token),
                ("a", NodeKind::Feature),
                ("b", NodeKind::Feature),
                ("l1", NodeKind::Logit),
                ("l2", NodeKind::Logit),
            ],
            &[("t", "a", 1.0), ("t", "b", 1.0), ("a", "l1", 2.0), ("b", "l2", 2.0)],
        );
        let eps = 1e-3;
        let p = logit_distribution(&g, &ids(&g, &[("a", "l1"), ("b", "l2")]), eps);
        assert!((p.get("l1").unwrap() - 0.5).abs() < 1e-15);
        let lopsided = logit_distribution(&g, &ids(&g, &[("a", "l1")]), eps);
        // (1 + eps) / (1 + 2 eps)
        assert!((lopsided.get("l1").unwrap() - (1.0 + eps) / (1.0 + 2.0 * eps)).abs() < 1e-15);
    }

    #[test]
    fn kl_closed_forms() {
        let dist = |pairs: &[(&str, f64)]| LogitDistribution {
            probs: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        let p = dist(&[("a", 1.0), ("b", 0.0)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        assert!((kl_divergence(&p, &q).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        let r = dist(&[("a", 0.5), ("c", 0.5)]);
        assert!(matches!(kl_divergence(&q, &r), Err(Error::SupportMismatch)));
        let s = dist(&[("a", 1.0)]);
        assert!(matches!(kl_divergence(&q, &s), Err(Error::SupportMismatch)));
    }
}
