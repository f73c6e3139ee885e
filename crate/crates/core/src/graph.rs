//! Attribution-graph data model, canonical JSON format and validation.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::edge_set::{EdgeId, EdgeSet, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Feature,
    Error,
    Token,
    Logit,
}

/// Ground-truth tier planted by the synthetic generator. Never read by the
/// pipeline math; it exists for evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantedTier {
    Core,
    Contingent,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub layer: u32,
    pub position: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_tier: Option<PlantedTier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    #[serde(rename = "w")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_tier: Option<PlantedTier>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphMeta {
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub target_token: String,
    #[serde(default)]
    pub model: String,
}

/// The on-disk shape of a graph. May be invalid; see [`validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub meta: GraphMeta,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateNodeId,
    UnknownNodeId,
    SelfLoop,
    InvalidWeight,
    DuplicateEdge,
    LogitOutgoing,
    TokenIncoming,
    NoLogit,
    Cycle,
}

/// One broken graph invariant and the element that breaks it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Violation {
    fn new(kind: ViolationKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

/// Checks every graph invariant and returns the violations in a fixed order.
/// An empty list means the document describes a valid attribution graph.
pub fn validate(doc: &GraphDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            out.push(Violation::new(
                ViolationKind::DuplicateNodeId,
                format!("duplicate node id: {}", node.id),
            ));
        }
    }
    if !doc.nodes.iter().any(|n| n.kind == NodeKind::Logit) {
        out.push(Violation::new(ViolationKind::NoLogit, "graph has no logit node"));
    }

    let mut seen_pairs: HashSet<(&str, &str)> = HashSet::with_capacity(doc.edges.len());
    let mut resolved = Vec::with_capacity(doc.edges.len());
    for edge in &doc.edges {
        let key = format!("{}->{}", edge.src, edge.dst);
        let src = index.get(edge.src.as_str()).copied();
        let dst = index.get(edge.dst.as_str()).copied();
        for (id, found) in [(&edge.src, src), (&edge.dst, dst)] {
            if found.is_none() {
                out.push(Violation::new(
                    ViolationKind::UnknownNodeId,
                    format!("unknown node id: {id} (edge {key})"),
                ));
            }
        }
        if edge.src == edge.dst {
            out.push(Violation::new(ViolationKind::SelfLoop, format!("self loop: {key}")));
        }
        if !edge.weight.is_finite() || edge.weight == 0.0 {
            out.push(Violation::new(
                ViolationKind::InvalidWeight,
                format!("edge weight must be finite and nonzero: {key} has {}", edge.weight),
            ));
        }
        if !seen_pairs.insert((edge.src.as_str(), edge.dst.as_str())) {
            out.push(Violation::new(ViolationKind::DuplicateEdge, format!("duplicate edge: {key}")));
        }
        if let Some(s) = src {
            if doc.nodes[s].kind == NodeKind::Logit {
                out.push(Violation::new(
                    ViolationKind::LogitOutgoing,
                    format!("logit node has outgoing edge: {}", edge.src),
                ));
            }
        }
        if let Some(d) = dst {
            if doc.nodes[d].kind == NodeKind::Token {
                out.push(Violation::new(
                    ViolationKind::TokenIncoming,
                    format!("token node has incoming edge: {}", edge.dst),
                ));
            }
        }
        if let (Some(s), Some(d)) = (src, dst) {
            if s != d {
                resolved.push((s, d));
            }
        }
    }

    if let Some(cycle) = find_cycle(doc.nodes.len(), &resolved) {
        let names: Vec<&str> = cycle.iter().map(|&i| doc.nodes[i].id.as_str()).collect();
        out.push(Violation::new(
            ViolationKind::Cycle,
            format!("cycle: {} -> {}", names.join(" -> "), names[0]),
        ));
    }
    out
}

/// Kahn's algorithm; on failure, walks the leftover subgraph to name a cycle.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in edges {
        indeg[d] += 1;
        out[s].push(d);
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = stack.pop() {
        removed[v] = true;
        for &x in &out[v] {
            indeg[x] -= 1;
            if indeg[x] == 0 {
                stack.push(x);
            }
        }
    }
    let start = (0..n).find(|&v| !removed[v])?;
    // Every leftover node has a leftover predecessor, so walking backwards
    // from any of them must revisit a node.
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for &(s, d) in edges {
        if !removed[s] && !removed[d] && pred[d].is_none() {
            pred[d] = Some(s);
        }
    }
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut walk = Vec::new();
    let mut v = start;
    loop {
        if let Some(&p) = pos.get(&v) {
            let mut cycle: Vec<usize> = walk[p..].to_vec();
            cycle.reverse();
            return Some(cycle);
        }
        pos.insert(v, walk.len());
        walk.push(v);
        v = pred[v].expect("leftover node has a leftover predecessor");
    }
}

/// A validated, immutable attribution graph.
///
/// Nodes are stored sorted by id and edges sorted by `(src, dst)`, so
/// [`NodeId`] and [`EdgeId`] order coincide with the lexicographic id order
/// used for tie-breaking everywhere in the pipeline.
#[derive(Debug, Clone)]
pub struct AttributionGraph {
    meta: GraphMeta,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, NodeId>,
    endpoints: Vec<(NodeId, NodeId)>,
    incoming: Vec<Vec<EdgeId>>,
    outgoing: Vec<Vec<EdgeId>>,
    topo: Vec<NodeId>,
    total_abs_weight: f64,
    fingerprint: u64,
}

impl PartialEq for AttributionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl AttributionGraph {
    /// Validates `doc` and builds the canonical graph, failing on the first
    /// violated invariant.
    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        if let Some(v) = validate(&doc).into_iter().next() {
            return Err(Error::Validation(v));
        }
        Ok(Self::build(doc.meta, doc.nodes, doc.edges))
    }

    /// Assumes `nodes`/`edges` already satisfy every invariant.
    pub(crate) fn build(meta: GraphMeta, mut nodes: Vec<Node>, mut edges: Vec<Edge>) -> Self {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        let index: HashMap<String, NodeId> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), NodeId(i as u32)))
            .collect();
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut total_abs_weight = 0.0;
        for (i, e) in edges.iter().enumerate() {
            let (s, d) = (index[&e.src], index[&e.dst]);
            endpoints.push((s, d));
            outgoing[s.index()].push(EdgeId(i as u32));
            incoming[d.index()].push(EdgeId(i as u32));
            total_abs_weight += e.weight.abs();
        }
        let topo = topological_order(nodes.len(), &endpoints, &outgoing);

        let mut hasher = DefaultHasher::new();
        meta.hash(&mut hasher);
        for n in &nodes {
            (&n.id, n.kind, n.layer, n.position).hash(&mut hasher);
        }
        for e in &edges {
            (&e.src, &e.dst, e.weight.to_bits()).hash(&mut hasher);
        }

        Self {
            meta,
            nodes,
            edges,
            index,
            endpoints,
            incoming,
            outgoing,
            topo,
            total_abs_weight,
            fingerprint: hasher.finish(),
        }
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn node_id(&self, id: &str) -> Option<NodeId> {
        self.index.get(id).copied()
    }

    /// Looks up an edge by its endpoint ids.
    pub fn edge_id(&self, src: &str, dst: &str) -> Option<EdgeId> {
        let s = self.node_id(src)?;
        let d = self.node_id(dst)?;
        self.outgoing[s.index()].iter().copied().find(|&e| self.endpoints[e.index()].1 == d)
    }

    pub fn endpoints(&self, id: EdgeId) -> (NodeId, NodeId) {
        self.endpoints[id.index()]
    }

    pub fn incoming(&self, node: NodeId) -> &[EdgeId] {
        &self.incoming[node.index()]
    }

    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        &self.outgoing[node.index()]
    }

    /// Nodes in topological order (every edge points forward).
    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn all_edges(&self) -> EdgeSet {
        EdgeSet::from_sorted_unchecked(self.edge_ids().collect())
    }

    pub fn logits(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&n| self.node(n).kind == NodeKind::Logit)
    }

    /// `|w|` per edge, indexed by [`EdgeId`].
    pub fn abs_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight.abs()).collect()
    }

    /// Φ(E): the sum of absolute edge weights over the whole graph.
    pub fn total_abs_weight(&self) -> f64 {
        self.total_abs_weight
    }

    /// Content hash used to check that views come from the same graph.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Edges carrying the given planted tier (synthetic graphs only).
    pub fn planted(&self, tier: PlantedTier) -> EdgeSet {
        EdgeSet::from_sorted_unchecked(
            self.edge_ids().filter(|&e| self.edge(e).planted_tier == Some(tier)).collect(),
        )
    }

    /// Returns the graph without the edges in `removed`.
    pub fn without_edges(&self, removed: &EdgeSet) -> (AttributionGraph, Vec<EdgeId>) {
        let kept: Vec<EdgeId> = self.edge_ids().filter(|&e| !removed.contains(e)).collect();
        let edges = kept.iter().map(|&e| self.edge(e).clone()).collect();
        (Self::build(self.meta.clone(), self.nodes.clone(), edges), kept)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            meta: self.meta.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Human-readable `src->dst` key for an edge.
    pub fn edge_key(&self, id: EdgeId) -> String {
        let e = self.edge(id);
        format!("{}->{}", e.src, e.dst)
    }
}

fn topological_order(
    n: usize,
    endpoints: &[(NodeId, NodeId)],
    outgoing: &[Vec<EdgeId>],
) -> Vec<NodeId> {
    let mut indeg = vec![0usize; n];
    for &(_, d) in endpoints {
        indeg[d.index()] += 1;
    }
    let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(NodeId(v as u32));
        for &e in &outgoing[v] {
            let d = endpoints[e.index()].1.index();
            indeg[d] -= 1;
            if indeg[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    assert_eq!(order.len(), n, "graph validated as acyclic");
    order
}

/// Parses and validates a graph document.
pub fn load_graph(bytes: &[u8]) -> Result<AttributionGraph> {
    let doc: GraphDocument = serde_json::from_slice(bytes)?;
    AttributionGraph::from_document(doc)
}

/// Canonical serialization: nodes by id, edges by `(src, dst)`, shortest
/// round-trip floats, trailing newline.
pub fn save_graph(g: &AttributionGraph) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&g.to_document()).expect("graph documents always serialize");
    out.push(b'\n');
    out
}
