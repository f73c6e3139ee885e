//! Stage timings on a large generated graph.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ensemble::{consensus, stability_scores};
use crate::error::{Error, Result};
use crate::graph::AttributionGraph;
use crate::influence::{compute_influence, influence_retained};
use crate::pruning::{grid_family, linspace, Pruner, PruningConfig};
use crate::synthetic::{generate_synthetic, SyntheticSpec};

/// Generator settings producing roughly `edges` edges.
pub fn bench_spec(edges: usize, seed: u64) -> SyntheticSpec {
    let core = (edges / 100).max(1);
    let contingent = edges / 50;
    let layers = 8;
    // capacity grows as f^2 * layers^2 / 2; keep the graph at most half full
    let mut features = 4;
    let mut spec = SyntheticSpec { layers, features_per_layer: features, logits: 4, seed, ..SyntheticSpec::default() };
    while spec.capacity() < 2 * edges {
        features += 4;
        spec.features_per_layer = features;
    }
    SyntheticSpec {
        core_edges: core.min(edges),
        contingent_edges: contingent.min(edges - core.min(edges)),
        noise_edges: edges - core.min(edges) - contingent.min(edges - core.min(edges)),
        ..spec
    }
}

/// `views` configurations whose loosest member keeps everything, so the
/// union of the views is the whole graph.
pub fn bench_family(views: usize) -> Result<Vec<PruningConfig>> {
    if views == 0 {
        return Err(Error::InvalidArgument("bench needs at least one view".into()));
    }
    let rows = (views as f64).sqrt().floor().max(1.0) as usize;
    let cols = views.div_ceil(rows);
    let mut family = grid_family(&linspace(0.6, 1.0, rows), &linspace(0.6, 1.0, cols))?;
    family.truncate(views);
    let last = family.len() - 1;
    family[last] = PruningConfig::new(1.0, 1.0)?;
    Ok(family)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub edges: usize,
    pub union_edges: usize,
    pub views: usize,
    pub repeats: usize,
    pub stages: Vec<StageTiming>,
}

impl BenchReport {
    pub fn median_ms(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.median_ms)
    }
}

fn summarize(stage: &'static str, mut samples: Vec<Duration>) -> StageTiming {
    samples.sort();
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let n = samples.len();
    let median = if n % 2 == 1 { ms(samples[n / 2]) } else { (ms(samples[n / 2 - 1]) + ms(samples[n / 2])) / 2.0 };
    StageTiming { stage, median_ms: median, min_ms: ms(samples[0]), max_ms: ms(samples[n - 1]) }
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Times each stage on `g` and reports medians over `repeats` runs.
///
/// Stages: `influence`, `prune` (all views), `stability`, `consensus`,
/// `stability+consensus`, `ir`, and `pipeline` (influence through IR).
pub fn bench_graph(g: &AttributionGraph, configs: &[PruningConfig], repeats: usize) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let mut stages: Vec<(&'static str, Vec<Duration>)> = ["influence", "prune", "stability", "consensus", "stability+consensus", "ir", "pipeline"]
        .into_iter()
        .map(|s| (s, Vec::with_capacity(repeats)))
        .collect();
    let mut union_edges = 0;
    for _ in 0..repeats {
        let (inf, t_inf) = time(|| compute_influence(g));
        let (views, t_prune) = time(|| Pruner::new(g, &inf).apply_all(configs));
        let views = views?;
        let (report, t_stab) = time(|| stability_scores(g, &views));
        let report = report?;
        let (c1, t_cons) = time(|| consensus(&report, 1.0));
        let c1 = c1?;
        let (ir, t_ir) = time(|| influence_retained(g, &c1));
        ir?;
        union_edges = report.union().len();
        for (slot, d) in stages.iter_mut().zip([
            t_inf,
            t_prune,
            t_stab,
            t_cons,
            t_stab + t_cons,
            t_ir,
            t_inf + t_prune + t_stab + t_cons + t_ir,
        ]) {
            slot.1.push(d);
        }
    }
    Ok(BenchReport {
        edges: g.edge_count(),
        union_edges,
        views: configs.len(),
        repeats,
        stages: stages.into_iter().map(|(s, v)| summarize(s, v)).collect(),
    })
}

/// Generates a graph of about `edges` edges and benchmarks it with `views`
/// configurations.
pub fn run_bench(edges: usize, views: usize, repeats: usize) -> Result<BenchReport> {
    if edges == 0 {
        return Err(Error::InvalidArgument("edge count must be at least 1".into()));
    }
    let g = generate_synthetic(&bench_spec(edges, 0))?;
    bench_graph(&g, &bench_family(views)?, repeats)
}
