#![allow(dead_code)]

use std::collections::BTreeMap;

use circuit_consensus::graph::{Edge, GraphDocument, GraphMeta, Node};
use circuit_consensus::influence::LogitSeeds;
use circuit_consensus::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn node(id: &str, kind: NodeKind, layer: u32) -> Node {
    Node { id: id.into(), kind, layer, position: 0, label: None, planted_tier: None }
}

pub fn edge(src: &str, dst: &str, w: f64) -> Edge {
    Edge { src: src.into(), dst: dst.into(), weight: w, planted_tier: None }
}

/// A random valid DAG with `n` nodes. Ids are shuffled relative to the
/// topological order, so canonical id order tells nothing about flow.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> GraphDocument {
    let mut ids: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    ids.shuffle(rng);
    let kinds: Vec<NodeKind> = (0..n)
        .map(|i| {
            if i == n - 1 {
                NodeKind::Logit
            } else {
                match rng.gen_range(0..10) {
                    0..=2 => NodeKind::Token,
                    3..=6 => NodeKind::Feature,
                    7 => NodeKind::Error,
                    _ => NodeKind::Logit,
                }
            }
        })
        .collect();
    let nodes = (0..n).map(|i| node(&ids[i], kinds[i], i as u32)).collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for d in s + 1..n {
            if kinds[s] == NodeKind::Logit || kinds[d] == NodeKind::Token || !rng.gen_bool(density) {
                continue;
            }
            let w = rng.gen_range(0.05..5.0) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
            edges.push(edge(&ids[s], &ids[d], w));
        }
    }
    GraphDocument { meta: GraphMeta::default(), nodes, edges }
}

/// Seed per logit: a random default and random overrides for some logits.
pub fn random_seeds<R: Rng>(rng: &mut R, doc: &GraphDocument) -> LogitSeeds {
    let mut overrides = BTreeMap::new();
    for n in doc.nodes.iter().filter(|n| n.kind == NodeKind::Logit) {
        if rng.gen_bool(0.5) {
            overrides.insert(n.id.clone(), rng.gen_range(0.0..3.0));
        }
    }
    LogitSeeds { default: rng.gen_range(0.1..2.0), overrides }
}

/// Influence of every node by explicit enumeration of all paths: the sum,
/// over every path starting at the node, of the product of normalized
/// weights along it times the final node's seed.
pub fn path_sum_influence(doc: &GraphDocument, seeds: &LogitSeeds) -> BTreeMap<String, f64> {
    let mut in_mass: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &doc.edges {
        *in_mass.entry(e.dst.as_str()).or_default() += e.weight.abs();
    }
    let seed_of = |id: &str| {
        let n = doc.nodes.iter().find(|n| n.id == id).unwrap();
        if n.kind == NodeKind::Logit {
            seeds.overrides.get(id).copied().unwrap_or(seeds.default)
        } else {
            0.0
        }
    };
    fn walk(
        doc: &GraphDocument,
        in_mass: &BTreeMap<&str, f64>,
        seed_of: &dyn Fn(&str) -> f64,
        at: &str,
        product: f64,
    ) -> f64 {
        let mut total = product * seed_of(at);
        for e in doc.edges.iter().filter(|e| e.src == at) {
            let a = e.weight.abs() / in_mass[e.dst.as_str()];
            total += walk(doc, in_mass, seed_of, &e.dst, product * a);
        }
        total
    }
    doc.nodes
        .iter()
        .map(|n| (n.id.clone(), walk(doc, &in_mass, &seed_of, &n.id, 1.0)))
        .collect()
}

/// A small generated graph (at most 100 edges) with random shape.
pub fn small_graph<R: Rng>(rng: &mut R) -> AttributionGraph {
    loop {
        let spec = SyntheticSpec {
            layers: rng.gen_range(2..=4),
            features_per_layer: rng.gen_range(2..=5),
            logits: rng.gen_range(1..=3),
            core_edges: rng.gen_range(2..=8),
            contingent_edges: rng.gen_range(0..=12),
            noise_edges: rng.gen_range(0..=80),
            seed: rng.gen(),
            ..SyntheticSpec::default()
        };
        if spec.core_edges + spec.contingent_edges + spec.noise_edges > 100 {
            continue;
        }
        if let Ok(g) = generate_synthetic(&spec) {
            return g;
        }
    }
}

pub fn random_config<R: Rng>(rng: &mut R) -> PruningConfig {
    PruningConfig::new(rng.gen_range(0.2..=1.0), rng.gen_range(0.2..=1.0)).unwrap()
}

pub fn random_subset<R: Rng>(rng: &mut R, g: &AttributionGraph, p: f64) -> EdgeSet {
    g.edge_ids().filter(|_| rng.gen_bool(p)).collect()
}

/// Brute-force view count per edge: linear scans, no indexing.
pub fn brute_counts(g: &AttributionGraph, views: &[View]) -> Vec<usize> {
    g.edge_ids()
        .map(|e| views.iter().filter(|v| v.edges.iter().any(|x| x == e)).count())
        .collect()
}

/// C_τ by brute force: the plain intersection when τ = 1, otherwise a count.
pub fn brute_consensus(g: &AttributionGraph, views: &[View], tau: f64) -> Vec<EdgeId> {
    let counts = brute_counts(g, views);
    let b = views.len();
    g.edge_ids()
        .filter(|e| {
            if tau == 1.0 {
                views.iter().all(|v| v.edges.iter().any(|x| x == *e))
            } else {
                counts[e.index()] as f64 / b as f64 >= tau
            }
        })
        .collect()
}

pub fn with_scaled_weights(g: &AttributionGraph, c: f64) -> AttributionGraph {
    let mut doc = g.to_document();
    for e in &mut doc.edges {
        e.weight *= c;
    }
    AttributionGraph::from_document(doc).unwrap()
}

/// The family used for planted-structure recovery: tight node thresholds
/// crossed with loose edge thresholds.
pub fn recovery_grid() -> Vec<PruningConfig> {
    grid_family(&circuit_consensus::pruning::linspace(0.95, 0.99, 5), &circuit_consensus::pruning::linspace(0.5, 0.7, 5))
        .unwrap()
}

/// Crossed k = 9 family: node keep rises while edge keep falls.
pub fn crossed_family() -> Vec<PruningConfig> {
    use circuit_consensus::pruning::linspace;
    non_nested_family(&linspace(0.5, 0.9, 9), &linspace(0.9, 0.99, 9)).unwrap()
}

/// Same-direction family: both thresholds rise together.
pub fn nested_family() -> Vec<PruningConfig> {
    [(0.6, 0.95), (0.8, 0.98), (0.9, 0.99)]
        .into_iter()
        .map(|(n, e)| PruningConfig::new(n, e).unwrap())
        .collect()
}

/// Exchangeable jittered family around one base configuration.
pub fn jittered_family<R: Rng>(rng: &mut R, b: usize) -> Vec<PruningConfig> {
    (0..b)
        .map(|_| {
            let n: f64 = 0.95 + rng.gen_range(-0.02..0.02);
            let e: f64 = 0.70 + rng.gen_range(-0.05..0.05);
            PruningConfig::new(n.min(1.0), e.min(1.0)).unwrap()
        })
        .collect()
}
