//! Seeded generator for layered attribution graphs with planted structure.
//!
//! Layer 0 holds the token nodes, layers `1..=layers` hold features and the
//! logits sit on layer `layers + 1`. Edges may skip layers but always point
//! to a strictly higher layer. Core and contingent edges are laid out as
//! complete token-to-logit paths, so they carry real flow to the logits;
//! noise edges connect arbitrary layer-ordered pairs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributionGraph, Edge, GraphMeta, Node, NodeKind, PlantedTier};

const MAX_PATH_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Number of feature layers between the tokens and the logits.
    pub layers: usize,
    /// Feature nodes per layer; also the number of token nodes.
    pub features_per_layer: usize,
    pub logits: usize,
    pub core_edges: usize,
    pub contingent_edges: usize,
    pub noise_edges: usize,
    pub core_weight_scale: f64,
    pub noise_weight_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            layers: 4,
            features_per_layer: 12,
            logits: 2,
            core_edges: 16,
            contingent_edges: 32,
            noise_edges: 240,
            core_weight_scale: 20.0,
            noise_weight_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Medium weight scale used for contingent paths: the geometric mean of
    /// the core and noise scales.
    pub fn contingent_weight_scale(&self) -> f64 {
        (self.core_weight_scale * self.noise_weight_scale).sqrt()
    }

    /// Number of distinct layer-ordered (src, dst) pairs the topology admits.
    pub fn capacity(&self) -> usize {
        let (f, l, t) = (self.features_per_layer, self.logits, self.features_per_layer);
        let layers = self.layers;
        // token -> every feature and logit
        let from_tokens = t * (layers * f + l);
        // feature on layer i -> features above it and every logit
        let from_features: usize = (1..=layers).map(|i| f * ((layers - i) * f + l)).sum();
        from_tokens + from_features
    }

    fn check(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Infeasible(format!("layers must be at least 2, got {}", self.layers)));
        }
        if self.features_per_layer == 0 || self.logits == 0 {
            return Err(Error::Infeasible("features_per_layer and logits must be positive".into()));
        }
        for (name, v) in [("core_weight_scale", self.core_weight_scale), ("noise_weight_scale", self.noise_weight_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Infeasible(format!("{name} must be a positive real, got {v}")));
            }
        }
        let requested = self.core_edges + self.contingent_edges + self.noise_edges;
        if requested > self.capacity() {
            return Err(Error::Infeasible(format!(
                "{requested} edges requested but the topology holds at most {}",
                self.capacity()
            )));
        }
        Ok(())
    }
}

struct Layout {
    /// Node indices per layer, token layer first, logit layer last.
    layers: Vec<Vec<usize>>,
    nodes: Vec<Node>,
}

impl Layout {
    fn new(spec: &SyntheticSpec) -> Self {
        let mut nodes = Vec::new();
        let mut layers = Vec::with_capacity(spec.layers + 2);
        let push = |nodes: &mut Vec<Node>, id: String, kind, layer: usize, position: usize| {
            nodes.push(Node {
                id,
                kind,
                layer: layer as u32,
                position: position as u32,
                label: None,
                planted_tier: None,
            });
            nodes.len() - 1
        };
        layers.push(
            (0..spec.features_per_layer)
                .map(|i| push(&mut nodes, format!("tok_{i:03}"), NodeKind::Token, 0, i))
                .collect(),
        );
        for layer in 1..=spec.layers {
            layers.push(
                (0..spec.features_per_layer)
                    .map(|i| push(&mut nodes, format!("feat_{layer:02}_{i:03}"), NodeKind::Feature, layer, i))
                    .collect(),
            );
        }
        let top = spec.layers + 1;
        layers.push(
            (0..spec.logits)
                .map(|i| push(&mut nodes, format!("logit_{i:02}"), NodeKind::Logit, top, spec.features_per_layer - 1))
                .collect(),
        );
        Self { layers, nodes }
    }
}

struct Builder<'a> {
    spec: &'a SyntheticSpec,
    layout: Layout,
    rng: ChaCha8Rng,
    used: HashSet<(usize, usize)>,
    edges: Vec<Edge>,
}

impl Builder<'_> {
    fn weight(&mut self, scale: f64) -> f64 {
        let magnitude = scale * self.rng.gen_range(0.5..1.5);
        if self.rng.gen_bool(0.25) {
            -magnitude
        } else {
            magnitude
        }
    }

    fn push(&mut self, s: usize, d: usize, tier: PlantedTier, scale: f64) {
        let weight = self.weight(scale);
        self.used.insert((s, d));
        self.edges.push(Edge {
            src: self.layout.nodes[s].id.clone(),
            dst: self.layout.nodes[d].id.clone(),
            weight,
            planted_tier: Some(tier),
        });
    }

    /// Lays down whole token-to-logit paths until exactly `count` new edges
    /// of `tier` exist. Paths end on logits in round-robin order so that
    /// every logit receives planted flow.
    fn plant_paths(&mut self, count: usize, tier: PlantedTier, scale: f64) -> Result<()> {
        let feature_layers = self.spec.layers;
        let mut placed = 0;
        let mut path_index = 0;
        let mut attempts = 0;
        while placed < count {
            attempts += 1;
            if attempts > MAX_PATH_ATTEMPTS {
                return Err(Error::Infeasible(format!(
                    "could not place {count} {tier:?} path edges (placed {placed})"
                )));
            }
            let remaining = count - placed;
            let longest = (feature_layers + 1).min(remaining);
            let len = if longest <= 2 { longest } else { self.rng.gen_range(2..=longest) };
            let mut hidden: Vec<usize> = (1..=feature_layers).collect();
            hidden.shuffle(&mut self.rng);
            hidden.truncate(len - 1);
            hidden.sort_unstable();

            let mut path = Vec::with_capacity(len + 1);
            path.push(*self.layout.layers[0].choose(&mut self.rng).expect("token layer nonempty"));
            for &layer in &hidden {
                path.push(*self.layout.layers[layer].choose(&mut self.rng).expect("feature layer nonempty"));
            }
            let logits = &self.layout.layers[feature_layers + 1];
            path.push(logits[path_index % logits.len()]);

            if path.windows(2).any(|w| self.used.contains(&(w[0], w[1]))) {
                continue;
            }
            for w in path.windows(2) {
                self.push(w[0], w[1], tier, scale);
            }
            placed += len;
            path_index += 1;
        }
        Ok(())
    }

    fn plant_noise(&mut self, count: usize, scale: f64) {
        let top = self.layout.layers.len() - 1;
        let free = self.spec.capacity() - self.used.len();
        if count * 2 <= free {
            let mut placed = 0;
            while placed < count {
                let ls = self.rng.gen_range(0..top);
                let ld = self.rng.gen_range(ls + 1..=top);
                let s = *self.layout.layers[ls].choose(&mut self.rng).expect("layer nonempty");
                let d = *self.layout.layers[ld].choose(&mut self.rng).expect("layer nonempty");
                if self.used.contains(&(s, d)) {
                    continue;
                }
                self.push(s, d, PlantedTier::Noise, scale);
                placed += 1;
            }
        } else {
            let mut candidates = Vec::with_capacity(free);
            for ls in 0..top {
                for ld in ls + 1..=top {
                    for &s in &self.layout.layers[ls] {
                        for &d in &self.layout.layers[ld] {
                            if !self.used.contains(&(s, d)) {
                                candidates.push((s, d));
                            }
                        }
                    }
                }
            }
            let (chosen, _) = candidates.partial_shuffle(&mut self.rng, count);
            for &(s, d) in chosen.iter() {
                self.push(s, d, PlantedTier::Noise, scale);
            }
        }
    }
}

/// Generates a planted graph. The result is a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<AttributionGraph> {
    spec.check()?;
    let mut b = Builder {
        spec,
        layout: Layout::new(spec),
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        used: HashSet::new(),
        edges: Vec::with_capacity(spec.core_edges + spec.contingent_edges + spec.noise_edges),
    };
    b.plant_paths(spec.core_edges, PlantedTier::Core, spec.core_weight_scale)?;
    b.plant_paths(spec.contingent_edges, PlantedTier::Contingent, spec.contingent_weight_scale())?;
    b.plant_noise(spec.noise_edges, spec.noise_weight_scale);

    let meta = GraphMeta {
        prompt: format!("synthetic seed {}", spec.seed),
        target_token: "logit_00".into(),
        model: "synthetic".into(),
    };
    Ok(AttributionGraph::build(meta, b.layout.nodes, b.edges))
}
