//! Run manifests and end-to-end orchestration.
//!
//! A run loads or generates each graph, computes influence, prunes it under
//! every configuration, scores stability, extracts consensus and taxonomy,
//! optionally boosts, evaluates against baselines and writes the reports.
//! Everything random is seeded from the manifest, and report files contain
//! no timings, so rerunning a manifest reproduces the reports byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boosting::{boost, post_pruned_result, BoostResult};
use crate::edge_set::EdgeSet;
use crate::ensemble::{
    bootstrap_consensus, classify_with, consensus, leave_one_out, match_single_config, pairwise_jaccard,
    percentile, stability_scores, TaxonomyBounds,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_stability_times_influence, coverage_curve, mean_sd, oracle_best_config, random_baseline,
    stability_influence_bins, tau_adaptive, union_pruned_baseline, view_ir, win_rates, IrTriple, RankBy, WinTally,
};
use crate::graph::{load_graph, AttributionGraph, PlantedTier};
use crate::influence::{
    compute_influence_with_seeds, influence_retained, kl_divergence, LogitSeeds, PerLogitInfluence,
    DEFAULT_EPSILON,
};
use crate::pruning::{grid_family, is_nested_chain, non_nested_family, NestingCheck, Pruner, PruningConfig};
use crate::synthetic::{generate_synthetic, SyntheticSpec};

/// Marker for report rows that need a live model and cannot be computed
/// from an attribution graph alone.
pub const OUT_OF_SCOPE: &str = "out-of-scope (requires model)";

pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    /// Graph file, relative to the manifest's directory unless absolute.
    Path { path: PathBuf, #[serde(default)] id: Option<String> },
    /// `replicates` generated graphs with seeds `spec.seed, spec.seed + 1, …`.
    Synthetic {
        spec: SyntheticSpec,
        #[serde(default = "one_usize")]
        replicates: usize,
    },
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigFamily {
    Explicit(Vec<PruningConfig>),
    Grid { node_levels: Vec<f64>, edge_levels: Vec<f64> },
    Crossed { node_levels: Vec<f64>, edge_levels: Vec<f64> },
}

impl ConfigFamily {
    pub fn configs(&self) -> Result<Vec<PruningConfig>> {
        let configs = match self {
            ConfigFamily::Explicit(list) => {
                let mut list = list.clone();
                for c in &mut list {
                    c.check()?;
                    if c.id.is_empty() {
                        c.id = PruningConfig::default_id(c.node_keep, c.edge_keep);
                    }
                }
                list
            }
            ConfigFamily::Grid { node_levels, edge_levels } => grid_family(node_levels, edge_levels)?,
            ConfigFamily::Crossed { node_levels, edge_levels } => non_nested_family(node_levels, edge_levels)?,
        };
        if configs.is_empty() {
            return Err(Error::InvalidConfig("config family is empty".into()));
        }
        Ok(configs)
    }

    /// Short label for the aggregate table's `configs` column.
    pub fn label(&self) -> String {
        match self {
            ConfigFamily::Explicit(list) => format!("explicit B={}", list.len()),
            ConfigFamily::Grid { node_levels, edge_levels } => {
                format!("grid B={}", node_levels.len() * edge_levels.len())
            }
            ConfigFamily::Crossed { node_levels, .. } => format!("non-nested B={}", node_levels.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSettings {
    pub enabled: bool,
    pub alpha: f64,
    /// Keep fraction for the post-pruned variant; `None` skips it.
    pub post_prune_keep: Option<f64>,
}

impl Default for BoostSettings {
    fn default() -> Self {
        Self { enabled: false, alpha: 0.9, post_prune_keep: Some(0.95) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    pub seeds: usize,
    pub seed: u64,
    pub rank_by: RankBy,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self { seeds: 10, seed: 0, rank_by: RankBy::Influence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self { samples: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default = "default_model")]
    pub model: String,
    pub graphs: Vec<GraphSource>,
    pub configs: ConfigFamily,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub taxonomy: TaxonomyBounds,
    #[serde(default)]
    pub boosting: BoostSettings,
    #[serde(default)]
    pub baseline: BaselineSettings,
    /// `None` skips the bootstrap.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: Option<BootstrapSettings>,
    #[serde(default = "default_margin")]
    pub tau_adaptive_margin: f64,
    #[serde(default = "default_epsilon")]
    pub kl_epsilon: f64,
    #[serde(default)]
    pub logit_seeds: LogitSeeds,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_model() -> String {
    "synthetic".into()
}
fn default_tau() -> f64 {
    1.0
}
fn default_bootstrap() -> Option<BootstrapSettings> {
    Some(BootstrapSettings::default())
}
fn default_margin() -> f64 {
    0.02
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let m: RunManifest = serde_json::from_slice(bytes)?;
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if self.graphs.is_empty() {
            return Err(Error::InvalidArgument("manifest lists no graph sources".into()));
        }
        if self.graphs.iter().any(|g| matches!(g, GraphSource::Synthetic { replicates: 0, .. })) {
            return Err(Error::InvalidArgument("synthetic source with zero replicates".into()));
        }
        self.configs.configs()?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidTau(self.tau));
        }
        if !(self.kl_epsilon.is_finite() && self.kl_epsilon > 0.0) {
            return Err(Error::InvalidArgument("kl_epsilon must be positive".into()));
        }
        if self.taxonomy.contingent > self.taxonomy.core {
            return Err(Error::InvalidArgument("taxonomy contingent bound exceeds core bound".into()));
        }
        Ok(())
    }
}

/// A graph ready for evaluation, with its report id.
pub struct LoadedGraph {
    pub id: String,
    pub source: String,
    pub graph: AttributionGraph,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.display().to_string(), source })?;
    }
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn load_sources<'m>(manifest: &'m RunManifest, base_dir: &Path) -> impl Iterator<Item = Result<LoadedGraph>> + 'm {
    let base = base_dir.to_path_buf();
    manifest
        .graphs
        .iter()
        .flat_map(|source| -> Vec<(GraphSource, u64)> {
            match source {
                GraphSource::Synthetic { spec, replicates } => {
                    (0..*replicates as u64).map(|i| (source.clone(), spec.seed + i)).collect()
                }
                GraphSource::Path { .. } => vec![(source.clone(), 0)],
            }
        })
        .enumerate()
        .map(move |(index, (source, seed))| match source {
            GraphSource::Path { path, id } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(&path) };
                let graph = load_graph(&read_file(&full)?)?;
                let stem = id.unwrap_or_else(|| {
                    full.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into())
                });
                Ok(LoadedGraph { id: format!("{index:03}-{stem}"), source: path.display().to_string(), graph })
            }
            GraphSource::Synthetic { spec, .. } => {
                let spec = spec.with_seed(seed);
                let graph = generate_synthetic(&spec)?;
                Ok(LoadedGraph {
                    id: format!("{index:03}-synthetic-seed{seed}"),
                    source: format!("synthetic seed {seed}"),
                    graph,
                })
            }
        })
}

/// Per-graph values the aggregate table is built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphRecord {
    pub graph_id: String,
    pub ir: IrTriple,
    pub kl_consensus: f64,
    pub kl_union_pruned: f64,
    pub match_index: Option<usize>,
    pub mean_jaccard: Option<f64>,
    pub consensus_size: usize,
    pub union_size: usize,
    /// IR of the first configuration's view, the "single analyst choice".
    pub single_config_ir: f64,
}

/// Everything computed for one graph.
pub struct GraphOutcome {
    pub record: GraphRecord,
    pub report: Value,
    pub coverage_csv: String,
    pub bins_csv: String,
}

fn edge_pairs(g: &AttributionGraph, set: &EdgeSet) -> Vec<[String; 2]> {
    set.iter().map(|e| [g.edge(e).src.clone(), g.edge(e).dst.clone()]).collect()
}

fn node_count(g: &AttributionGraph, set: &EdgeSet) -> usize {
    let mut nodes: Vec<u32> = set
        .iter()
        .flat_map(|e| {
            let (s, d) = g.endpoints(e);
            [s.0, d.0]
        })
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes.len()
}

fn boost_rows(g: &AttributionGraph, full: &BoostResult, pruned: Option<&BoostResult>) -> Result<Value> {
    let mut rows = vec![
        json!({"circuit": "c1", "edges": full.c1.len(), "nodes": node_count(g, &full.c1), "ir": full.ir_c1}),
        json!({"circuit": "c2", "edges": full.c2.len(), "nodes": node_count(g, &full.c2), "ir": influence_retained(g, &full.c2)?}),
        json!({"circuit": "c1_union_c2", "edges": full.boosted.len(), "nodes": node_count(g, &full.boosted), "ir": full.ir_boosted}),
        json!({"circuit": "c1_union_c2_compact", "status": "not reconstructible: no construction is defined"}),
    ];
    if let Some(p) = pruned {
        rows.push(json!({"circuit": "post_pruned", "edges": p.boosted.len(), "nodes": node_count(g, &p.boosted), "ir": p.ir_boosted}));
    }
    Ok(json!({"alpha": full.alpha, "rows": rows}))
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Runs the full per-graph pipeline.
pub fn evaluate_graph(manifest: &RunManifest, id: &str, source: &str, g: &AttributionGraph) -> Result<GraphOutcome> {
    let configs = manifest.configs.configs()?;
    let inf = compute_influence_with_seeds(g, &manifest.logit_seeds)?;
    let views = Pruner::new(g, &inf).apply_all(&configs)?;
    let report = stability_scores(g, &views)?;
    let b = report.views();

    let c_tau = consensus(&report, manifest.tau)?;
    let c1 = consensus(&report, 1.0)?;
    let taxonomy = classify_with(&report, manifest.taxonomy);
    let match_index = match_single_config(&c1, &views);
    let nesting = if b >= 2 { Some(is_nested_chain(&views)?) } else { None };
    let jaccard = if b >= 2 { Some(pairwise_jaccard(&views)?) } else { None };
    let loo = if b >= 2 { Some(leave_one_out(&views)?) } else { None };

    let ir_c1 = influence_retained(g, &c1)?;
    let rank_scores = manifest.baseline.rank_by.scores(g, &inf);
    let k = c1.len();
    let union_pruned = union_pruned_baseline(&report, &rank_scores, k)?;
    let ir_up = influence_retained(g, &union_pruned)?;
    let randoms = random_baseline(&report, k, manifest.baseline.seeds, manifest.baseline.seed)?;
    let random_irs: Vec<f64> = randoms.iter().map(|s| influence_retained(g, s)).collect::<Result<_>>()?;
    let random_mean = if random_irs.is_empty() { f64::NAN } else { mean_sd(&random_irs).0 };

    let per_logit = PerLogitInfluence::new(g);
    let eps = manifest.kl_epsilon;
    let p_full = per_logit.distribution(&g.all_edges(), eps);
    let kl_consensus = kl_divergence(&p_full, &per_logit.distribution(&c1, eps))?;
    let kl_union_pruned = kl_divergence(&p_full, &per_logit.distribution(&union_pruned, eps))?;

    let product = aggregate_stability_times_influence(&report, &inf, k)?;
    let tau_star = tau_adaptive(&report, g, &views, manifest.tau_adaptive_margin)?;
    let (oracle_view, oracle_ir) = oracle_best_config(&views, g)?;
    let curve = coverage_curve(&report, g)?;
    let bins = stability_influence_bins(&report, &inf);

    let boosting = if manifest.boosting.enabled {
        let full = boost(g, &c1, manifest.boosting.alpha)?;
        let pruned = manifest
            .boosting
            .post_prune_keep
            .map(|keep| post_pruned_result(g, &inf, &full, keep))
            .transpose()?;
        boost_rows(g, &full, pruned.as_ref())?
    } else {
        Value::Null
    };

    let bootstrap = match &manifest.bootstrap {
        Some(s) if b >= 2 => serde_json::to_value(bootstrap_consensus(&views, g, s.samples, s.seed)?)?,
        Some(_) => json!("skipped: needs at least two views"),
        None => Value::Null,
    };

    let planted = {
        let core = g.planted(PlantedTier::Core);
        let noise = g.planted(PlantedTier::Noise);
        if core.is_empty() && noise.is_empty() {
            Value::Null
        } else {
            let frac = |set: &EdgeSet| (!set.is_empty()).then(|| c1.intersection_len(set) as f64 / set.len() as f64);
            json!({
                "planted_core_in_consensus": frac(&core),
                "planted_noise_in_consensus": frac(&noise),
                "planted_contingent_in_consensus": frac(&g.planted(PlantedTier::Contingent)),
            })
        }
    };

    let union_total = report.union().len().max(1) as f64;
    let sensitivity: Vec<Value> = (1..=b)
        .map(|m| {
            let c = views[..m].iter().skip(1).fold(views[0].edges.clone(), |acc, v| acc.intersection(&v.edges));
            Ok(json!({"views": m, "consensus_size": c.len(), "ir": influence_retained(g, &c)?}))
        })
        .collect::<Result<_>>()?;

    let nesting_json = match &nesting {
        Some(NestingCheck::Chain(order)) => json!({"nested": true, "chain": order}),
        Some(NestingCheck::Incomparable(i, j)) => json!({"nested": false, "incomparable": [i, j]}),
        None => Value::Null,
    };

    let report_json = json!({
        "graph": {
            "id": id,
            "source": source,
            "meta": g.meta(),
            "nodes": g.node_count(),
            "edges": g.edge_count(),
        },
        "configs": configs,
        "exact": {
            "views": b,
            "view_sizes": report.view_sizes(),
            "view_ir": views.iter().map(|v| view_ir(g, v)).collect::<Result<Vec<_>>>()?,
            "union_size": report.union().len(),
            "union_ir": influence_retained(g, report.union())?,
            "strict_consensus": {"size": c1.len(), "ir": ir_c1, "edges": edge_pairs(g, &c1)},
            "consensus_at_tau": {"tau": manifest.tau, "size": c_tau.len(), "ir": influence_retained(g, &c_tau)?},
            "taxonomy": {
                "bounds": manifest.taxonomy,
                "core": taxonomy.core.len(),
                "contingent": taxonomy.contingent.len(),
                "noise": taxonomy.noise.len(),
            },
            "match_index": match_index,
            "nesting": nesting_json,
            "stability": report.to_document(g),
            "baselines": {
                "budget": k,
                "union_pruned": {"rank_by": manifest.baseline.rank_by, "ir": ir_up},
            },
            "aggregation_rules": {
                "stability_times_influence_ir": influence_retained(g, &product)?,
                "tau_adaptive": {"margin": manifest.tau_adaptive_margin, "tau": tau_star},
                "oracle_best_config": {"view": oracle_view, "ir": oracle_ir},
            },
            "kl": {"epsilon": eps, "consensus": kl_consensus, "union_pruned": kl_union_pruned},
            "jaccard": jaccard,
            "coverage_curve": curve,
            "stability_influence_bins": bins,
            "leave_one_out": loo,
            "boosting": boosting,
            "planted_recovery": planted,
        },
        "measured": {
            "random_baseline": {
                "seeds": manifest.baseline.seeds,
                "seed": manifest.baseline.seed,
                "irs": random_irs,
                "mean_ir": random_mean,
            },
            "bootstrap": bootstrap,
        },
        "summary_analyses": {
            "rejection": {
                "stability_one_edges": taxonomy.core.len(),
                "stability_one_fraction": taxonomy.core.len() as f64 / union_total,
                "below_contingent_fraction": taxonomy.noise.len() as f64 / union_total,
            },
            "alternatives": {
                "contingent_edges": taxonomy.contingent.len(),
                "contingent_ir": influence_retained(g, &taxonomy.contingent)?,
            },
            "sensitivity": sensitivity,
            "approx_intervention": OUT_OF_SCOPE,
            "ablation": OUT_OF_SCOPE,
            "patching": OUT_OF_SCOPE,
            "prompt_level": OUT_OF_SCOPE,
        },
    });

    let coverage_csv = csv_string(
        &["tau", "size", "ir"],
        curve.iter().map(|p| vec![p.tau.to_string(), p.size.to_string(), p.ir.to_string()]),
    );
    let bins_csv = csv_string(
        &["k", "score", "edge_count", "mean_influence"],
        bins.iter().map(|b| {
            vec![b.k.to_string(), b.score.to_string(), b.edge_count.to_string(), b.mean_influence.to_string()]
        }),
    );

    Ok(GraphOutcome {
        record: GraphRecord {
            graph_id: id.to_string(),
            ir: IrTriple { consensus: ir_c1, union_pruned: ir_up, random_mean },
            kl_consensus,
            kl_union_pruned,
            match_index,
            mean_jaccard: jaccard.and_then(|j| j.mean),
            consensus_size: c1.len(),
            union_size: report.union().len(),
            single_config_ir: view_ir(g, &views[0])?,
        },
        report: report_json,
        coverage_csv,
        bins_csv,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub model: String,
    pub configs: String,
    pub graphs: usize,
    pub ir_mean: f64,
    pub ir_sd: f64,
    pub w_up: WinTally,
    pub w_rand: WinTally,
    pub match_count: usize,
    pub mean_jaccard: Option<f64>,
    pub kl_consensus_mean: f64,
    pub kl_union_pruned_mean: f64,
    pub kl_wins: usize,
    /// Width of the 95% bootstrap interval (over graphs) of mean IR.
    pub ci_width: Value,
}

fn mean_ci_width(values: &[f64], samples: usize, seed: u64) -> f64 {
    let n = values.len();
    let mut means: Vec<f64> = (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    percentile(&means, 0.975) - percentile(&means, 0.025)
}

pub fn aggregate(manifest: &RunManifest, records: &[GraphRecord]) -> Aggregate {
    let irs: Vec<f64> = records.iter().map(|r| r.ir.consensus).collect();
    let (ir_mean, ir_sd) = mean_sd(&irs);
    let triples: Vec<IrTriple> = records.iter().map(|r| r.ir).collect();
    let (w_up, w_rand) = win_rates(&triples);
    let jaccards: Vec<f64> = records.iter().filter_map(|r| r.mean_jaccard).collect();
    let ci_width = match &manifest.bootstrap {
        Some(s) if records.len() >= 2 => {
            let single: Vec<f64> = records.iter().map(|r| r.single_config_ir).collect();
            json!({
                "consensus": mean_ci_width(&irs, s.samples, s.seed),
                "single_config": mean_ci_width(&single, s.samples, s.seed),
            })
        }
        _ => json!("skipped: needs bootstrap settings and at least two graphs"),
    };
    Aggregate {
        model: manifest.model.clone(),
        configs: manifest.configs.label(),
        graphs: records.len(),
        ir_mean,
        ir_sd,
        w_up,
        w_rand,
        match_count: records.iter().filter(|r| r.match_index.is_some()).count(),
        mean_jaccard: (!jaccards.is_empty()).then(|| mean_sd(&jaccards).0),
        kl_consensus_mean: mean_sd(&records.iter().map(|r| r.kl_consensus).collect::<Vec<_>>()).0,
        kl_union_pruned_mean: mean_sd(&records.iter().map(|r| r.kl_union_pruned).collect::<Vec<_>>()).0,
        kl_wins: records.iter().filter(|r| r.kl_consensus < r.kl_union_pruned).count(),
        ci_width,
    }
}

/// The four-decimal `mean±sd` rendering used in the aggregate table.
fn table_row(a: &Aggregate) -> Vec<String> {
    vec![
        a.model.clone(),
        a.configs.clone(),
        format!("{:.3}±{:.3}", a.ir_mean, a.ir_sd),
        a.w_up.fraction(),
        a.w_rand.fraction(),
        format!("{}/{}", a.match_count, a.graphs),
    ]
}

pub fn aggregate_csv(a: &Aggregate) -> String {
    csv_string(&["model", "configs", "IR", "W-UP", "W-Rand", "Match"], std::iter::once(table_row(a)))
}

pub fn records_csv(records: &[GraphRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    csv_string(
        &[
            "graph",
            "ir_consensus",
            "ir_union_pruned",
            "ir_random_mean",
            "kl_consensus",
            "kl_union_pruned",
            "match_index",
            "mean_jaccard",
            "consensus_size",
            "union_size",
        ],
        records.iter().map(|r| {
            vec![
                r.graph_id.clone(),
                r.ir.consensus.to_string(),
                r.ir.union_pruned.to_string(),
                r.ir.random_mean.to_string(),
                r.kl_consensus.to_string(),
                r.kl_union_pruned.to_string(),
                r.match_index.map(|i| i.to_string()).unwrap_or_default(),
                opt(r.mean_jaccard),
                r.consensus_size.to_string(),
                r.union_size.to_string(),
            ]
        }),
    )
}

#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub records: Vec<GraphRecord>,
    pub aggregate: Aggregate,
}

fn pretty(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Executes a manifest and writes its reports under `output_dir` (resolved
/// against `base_dir` when relative).
///
/// Layout: `graphs/<id>.json`, `curves/<id>.coverage.csv`,
/// `bins/<id>.stability_influence.csv`, `records.csv`, `aggregate.json` and
/// `aggregate.csv`. If a graph fails, reports already written stay in place
/// and a `FAILED` file records the diagnostic.
pub fn run_manifest(manifest: &RunManifest, base_dir: &Path) -> Result<RunOutcome> {
    manifest.check()?;
    let out = if manifest.output_dir.is_absolute() {
        manifest.output_dir.clone()
    } else {
        base_dir.join(&manifest.output_dir)
    };
    fs::create_dir_all(&out).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
    let marker = out.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|source| Error::Io { path: marker.display().to_string(), source })?;
    }

    let result = run_into(manifest, base_dir, &out);
    if let Err(e) = &result {
        write_file(&marker, format!("{e}\n").as_bytes())?;
    }
    result
}

fn run_into(manifest: &RunManifest, base_dir: &Path, out: &Path) -> Result<RunOutcome> {
    let sources: Vec<Result<LoadedGraph>> = load_sources(manifest, base_dir).collect();
    let outcomes: Vec<Result<(String, GraphOutcome)>> = sources
        .into_par_iter()
        .map(|lg| {
            let lg = lg?;
            Ok((lg.id.clone(), evaluate_graph(manifest, &lg.id, &lg.source, &lg.graph)?))
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (id, outcome) = outcome.map_err(|e| {
            log::error!("graph {} of the manifest failed: {e}", records.len());
            e
        })?;
        write_file(&out.join("graphs").join(format!("{id}.json")), &pretty(&outcome.report)?)?;
        write_file(&out.join("curves").join(format!("{id}.coverage.csv")), outcome.coverage_csv.as_bytes())?;
        write_file(&out.join("bins").join(format!("{id}.stability_influence.csv")), outcome.bins_csv.as_bytes())?;
        records.push(outcome.record);
    }

    let agg = aggregate(manifest, &records);
    write_file(&out.join("records.csv"), records_csv(&records).as_bytes())?;
    write_file(&out.join("aggregate.json"), &pretty(&json!({"aggregate": agg, "records": records}))?)?;
    write_file(&out.join("aggregate.csv"), aggregate_csv(&agg).as_bytes())?;
    Ok(RunOutcome { output_dir: out.to_path_buf(), records, aggregate: agg })
}
