//! Stability scores, consensus circuits, the core/contingent/noise taxonomy
//! and diagnostics over a family of views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge_set::{EdgeId, EdgeSet};
use crate::error::{Error, Result};
use crate::graph::AttributionGraph;
use crate::influence::influence_retained;
use crate::pruning::{check_same_graph, View};

/// Per-edge inclusion counts over `B` views. The stability score of an edge
/// is `count / B`; only union edges have a nonzero count.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    views: usize,
    counts: Vec<u32>,
    union: EdgeSet,
    view_sizes: Vec<usize>,
    graph: u64,
}

impl StabilityReport {
    /// B, the number of views.
    pub fn views(&self) -> usize {
        self.views
    }

    pub fn union(&self) -> &EdgeSet {
        &self.union
    }

    pub fn view_sizes(&self) -> &[usize] {
        &self.view_sizes
    }

    /// Number of views containing `e`.
    pub fn count(&self, e: EdgeId) -> u32 {
        self.counts[e.index()]
    }

    /// s(e) = count / B.
    pub fn score(&self, e: EdgeId) -> f64 {
        self.counts[e.index()] as f64 / self.views as f64
    }

    pub fn graph_fingerprint(&self) -> u64 {
        self.graph
    }

    pub fn to_document(&self, g: &AttributionGraph) -> StabilityDocument {
        StabilityDocument {
            views: self.views,
            view_sizes: self.view_sizes.clone(),
            scores: self
                .union
                .iter()
                .map(|e| {
                    let edge = g.edge(e);
                    ScoreRecord { src: edge.src.clone(), dst: edge.dst.clone(), k: self.count(e) }
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &StabilityDocument, g: &AttributionGraph) -> Result<Self> {
        if doc.views == 0 || doc.view_sizes.len() != doc.views {
            return Err(Error::InvalidArgument("stability document view count is inconsistent".into()));
        }
        let mut counts = vec![0u32; g.edge_count()];
        for r in &doc.scores {
            let e = g.edge_id(&r.src, &r.dst).ok_or_else(|| {
                Error::InvalidArgument(format!("stability document names unknown edge {}->{}", r.src, r.dst))
            })?;
            if r.k == 0 || r.k as usize > doc.views {
                return Err(Error::InvalidArgument(format!("count {} out of range for {}->{}", r.k, r.src, r.dst)));
            }
            counts[e.index()] = r.k;
        }
        Ok(Self::from_counts(doc.views, counts, doc.view_sizes.clone(), g.fingerprint()))
    }

    fn from_counts(views: usize, counts: Vec<u32>, view_sizes: Vec<usize>, graph: u64) -> Self {
        let union = EdgeSet::from_sorted_unchecked(
            counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| EdgeId(i as u32)).collect(),
        );
        Self { views, counts, union, view_sizes, graph }
    }
}

/// Serialized scores: each union edge with its inclusion count `k`, plus B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDocument {
    pub views: usize,
    pub view_sizes: Vec<usize>,
    pub scores: Vec<ScoreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub src: String,
    pub dst: String,
    pub k: u32,
}

fn graph_edge_bound(views: &[View]) -> usize {
    views
        .iter()
        .filter_map(|v| v.edges.as_slice().last())
        .map(|e| e.index() + 1)
        .max()
        .unwrap_or(0)
}

/// Stability scores for views drawn from `g`.
pub fn stability_scores(g: &AttributionGraph, views: &[View]) -> Result<StabilityReport> {
    if views.is_empty() {
        return Err(Error::TooFewViews { required: 1, got: 0 });
    }
    check_same_graph(views)?;
    if views[0].graph_fingerprint() != g.fingerprint() {
        return Err(Error::MixedGraphs);
    }
    debug_assert!(graph_edge_bound(views) <= g.edge_count());
    let mut counts = vec![0u32; g.edge_count()];
    for v in views {
        for e in &v.edges {
            counts[e.index()] += 1;
        }
    }
    let sizes = views.iter().map(|v| v.edges.len()).collect();
    Ok(StabilityReport::from_counts(views.len(), counts, sizes, g.fingerprint()))
}

/// C_τ = {e : s(e) ≥ τ}.
pub fn consensus(report: &StabilityReport, tau: f64) -> Result<EdgeSet> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidTau(tau));
    }
    let b = report.views as f64;
    Ok(EdgeSet::from_sorted_unchecked(
        report.union.iter().filter(|&e| report.count(e) as f64 / b >= tau).collect(),
    ))
}

/// Score boundaries for the taxonomy: `s ≥ core` is core,
/// `contingent ≤ s < core` is contingent, anything lower is noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyBounds {
    pub core: f64,
    pub contingent: f64,
}

impl Default for TaxonomyBounds {
    fn default() -> Self {
        Self { core: 1.0, contingent: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    pub core: EdgeSet,
    pub contingent: EdgeSet,
    pub noise: EdgeSet,
}

pub fn classify(report: &StabilityReport) -> Taxonomy {
    classify_with(report, TaxonomyBounds::default())
}

pub fn classify_with(report: &StabilityReport, bounds: TaxonomyBounds) -> Taxonomy {
    let (mut core, mut contingent, mut noise) = (Vec::new(), Vec::new(), Vec::new());
    for e in report.union.iter() {
        let s = report.score(e);
        if s >= bounds.core {
            core.push(e);
        } else if s >= bounds.contingent {
            contingent.push(e);
        } else {
            noise.push(e);
        }
    }
    Taxonomy {
        core: EdgeSet::from_sorted_unchecked(core),
        contingent: EdgeSet::from_sorted_unchecked(contingent),
        noise: EdgeSet::from_sorted_unchecked(noise),
    }
}

/// Index of the first view whose edge set equals `consensus_edges`.
pub fn match_single_config(consensus_edges: &EdgeSet, views: &[View]) -> Option<usize> {
    views.iter().position(|v| &v.edges == consensus_edges)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaccardSummary {
    /// Mean over scored pairs i < j; `None` when every pair was skipped.
    pub mean: Option<f64>,
    /// Symmetric matrix; `None` where both views are empty.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub skipped_pairs: usize,
}

pub fn jaccard(a: &EdgeSet, b: &EdgeSet) -> Option<f64> {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    (union > 0).then(|| inter as f64 / union as f64)
}

pub fn pairwise_jaccard(views: &[View]) -> Result<JaccardSummary> {
    let b = views.len();
    if b < 2 {
        return Err(Error::TooFewViews { required: 2, got: b });
    }
    let mut matrix = vec![vec![None; b]; b];
    let (mut sum, mut scored, mut skipped) = (0.0, 0usize, 0usize);
    for i in 0..b {
        matrix[i][i] = jaccard(&views[i].edges, &views[i].edges);
        for j in i + 1..b {
            let value = jaccard(&views[i].edges, &views[j].edges);
            match value {
                Some(v) => {
                    sum += v;
                    scored += 1;
                }
                None => {
                    log::warn!("views {i} and {j} are both empty; skipping their Jaccard pair");
                    skipped += 1;
                }
            }
            matrix[i][j] = value;
            matrix[j][i] = value;
        }
    }
    Ok(JaccardSummary { mean: (scored > 0).then(|| sum / scored as f64), matrix, skipped_pairs: skipped })
}

/// One attainable score bin `k / (B-1)` of the leave-one-out table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionBin {
    pub k: usize,
    pub score: f64,
    /// Mean over held-out folds (where the bin is populated) of the fraction
    /// of the bin's edges present in the held-out view.
    pub retention: f64,
    /// Edges in the bin, summed over folds.
    pub edge_count: usize,
    pub folds: usize,
}

/// Holds out each view in turn, scores the union of the remaining `B-1`
/// views, and measures how often each score bin reappears in the held-out
/// view.
pub fn leave_one_out(views: &[View]) -> Result<Vec<RetentionBin>> {
    let b = views.len();
    if b < 2 {
        return Err(Error::TooFewViews { required: 2, got: b });
    }
    check_same_graph(views)?;
    let bound = graph_edge_bound(views);
    let rest = b - 1;
    let mut retention_sum = vec![0.0; rest + 1];
    let mut edge_total = vec![0usize; rest + 1];
    let mut folds = vec![0usize; rest + 1];

    let mut counts = vec![0u32; bound];
    for v in views {
        for e in &v.edges {
            counts[e.index()] += 1;
        }
    }
    for held in views {
        let mut in_bin = vec![0usize; rest + 1];
        let mut retained = vec![0usize; rest + 1];
        for (i, &c) in counts.iter().enumerate() {
            let id = EdgeId(i as u32);
            let in_held = held.edges.contains(id);
            let k = c as usize - usize::from(in_held);
            if k == 0 {
                continue;
            }
            in_bin[k] += 1;
            retained[k] += usize::from(in_held);
        }
        for k in 1..=rest {
            if in_bin[k] > 0 {
                retention_sum[k] += retained[k] as f64 / in_bin[k] as f64;
                edge_total[k] += in_bin[k];
                folds[k] += 1;
            }
        }
    }
    Ok((1..=rest)
        .filter(|&k| folds[k] > 0)
        .map(|k| RetentionBin {
            k,
            score: k as f64 / rest as f64,
            retention: retention_sum[k] / folds[k] as f64,
            edge_count: edge_total[k],
            folds: folds[k],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub samples: usize,
    /// |C_1| over all views.
    pub size_point: usize,
    pub size_ci: Interval,
    /// IR(C_1) over all views.
    pub ir_point: f64,
    pub ir_ci: Interval,
    pub size_point_in_ci: bool,
    pub ir_point_in_ci: bool,
}

/// Linear-interpolation percentile (`q` in [0, 1]) of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn strict_consensus(views: &[&View]) -> EdgeSet {
    let mut iter = views.iter();
    let first = iter.next().expect("at least one view").edges.clone();
    iter.fold(first, |acc, v| acc.intersection(&v.edges))
}

/// Resamples B views with replacement `n_boot` times and reports 95%
/// percentile intervals of |C_1| and IR(C_1). Sample `i` draws from its own
/// ChaCha stream, so the result does not depend on thread scheduling.
pub fn bootstrap_consensus(views: &[View], g: &AttributionGraph, n_boot: usize, seed: u64) -> Result<BootstrapSummary> {
    let b = views.len();
    if b < 2 {
        return Err(Error::TooFewViews { required: 2, got: b });
    }
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be at least 1".into()));
    }
    check_same_graph(views)?;
    if views[0].graph_fingerprint() != g.fingerprint() {
        return Err(Error::MixedGraphs);
    }
    let all: Vec<&View> = views.iter().collect();
    let point = strict_consensus(&all);
    let ir_point = influence_retained(g, &point)?;

    let samples: Vec<(f64, f64)> = (0..n_boot)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let drawn: Vec<&View> = (0..b).map(|_| &views[rng.gen_range(0..b)]).collect();
            let c1 = strict_consensus(&drawn);
            Ok((c1.len() as f64, influence_retained(g, &c1)?))
        })
        .collect::<Result<_>>()?;
    let mut sizes: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut irs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    sizes.sort_by(f64::total_cmp);
    irs.sort_by(f64::total_cmp);
    let size_ci = Interval { low: percentile(&sizes, 0.025), high: percentile(&sizes, 0.975) };
    let ir_ci = Interval { low: percentile(&irs, 0.025), high: percentile(&irs, 0.975) };
    Ok(BootstrapSummary {
        samples: n_boot,
        size_point: point.len(),
        size_ci,
        ir_point,
        ir_ci,
        size_point_in_ci: size_ci.contains(point.len() as f64),
        ir_point_in_ci: ir_ci.contains(ir_point),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::compute_influence;
    use crate::pruning::{grid_family, linspace, Pruner, PruningConfig};
    use crate::synthetic::{generate_synthetic, SyntheticSpec};

    fn fixture() -> (AttributionGraph, View) {
        let g = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let inf = compute_influence(&g);
        let v = Pruner::new(&g, &inf).apply(&PruningConfig::new(1.0, 1.0).unwrap()).unwrap();
        (g, v)
    }

    fn with_edges(template: &View, ids: &[u32]) -> View {
        let mut v = template.clone();
        v.edges = ids.iter().map(|&i| EdgeId(i)).collect();
        v
    }

    #[test]
    fn identical_views_score_one() {
        let (g, v) = fixture();
        let views = vec![with_edges(&v, &[1, 2, 3]); 4];
        let r = stability_scores(&g, &views).unwrap();
        assert!(r.union().iter().all(|e| r.score(e) == 1.0));
        assert_eq!(consensus(&r, 1.0).unwrap(), *r.union());
        assert_eq!(match_single_config(&consensus(&r, 1.0).unwrap(), &views), Some(0));
        let loo = leave_one_out(&views).unwrap();
        assert_eq!(loo.len(), 1);
        assert_eq!(loo[0].retention, 1.0);
        assert_eq!(pairwise_jaccard(&views).unwrap().mean, Some(1.0));
    }

    #[test]
    fn disjoint_views_score_half() {
        let (g, v) = fixture();
        let views = vec![with_edges(&v, &[0, 1]), with_edges(&v, &[2, 3])];
        let r = stability_scores(&g, &views).unwrap();
        assert!(r.union().iter().all(|e| r.score(e) == 0.5));
        assert!(consensus(&r, 1.0).unwrap().is_empty());
        assert_eq!(consensus(&r, 0.5).unwrap(), *r.union());
        assert_eq!(pairwise_jaccard(&views).unwrap().mean, Some(0.0));
        assert_eq!(match_single_config(&EdgeSet::new(), &views), None);
        let t = classify(&r);
        assert_eq!(t.contingent.len(), 4);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let (g, v) = fixture();
        assert!(matches!(stability_scores(&g, &[]), Err(Error::TooFewViews { .. })));
        let r = stability_scores(&g, std::slice::from_ref(&v)).unwrap();
        assert!(matches!(consensus(&r, 0.0), Err(Error::InvalidTau(_))));
        assert!(matches!(consensus(&r, 1.5), Err(Error::InvalidTau(_))));
        assert!(pairwise_jaccard(std::slice::from_ref(&v)).is_err());
        assert!(leave_one_out(std::slice::from_ref(&v)).is_err());
        assert!(bootstrap_consensus(&[v.clone(), v.clone()], &g, 0, 1).is_err());
        assert_eq!(match_single_config(&v.edges, std::slice::from_ref(&v)), Some(0));
    }

    #[test]
    fn taxonomy_boundaries() {
        let (g, v) = fixture();
        // Edge 0 in 4/4 views, edge 1 in 2/4, edge 2 in 1/4.
        let views = vec![
            with_edges(&v, &[0, 1, 2]),
            with_edges(&v, &[0, 1]),
            with_edges(&v, &[0]),
            with_edges(&v, &[0]),
        ];
        let r = stability_scores(&g, &views).unwrap();
        let t = classify(&r);
        assert_eq!(t.core.as_slice(), &[EdgeId(0)]);
        assert_eq!(t.contingent.as_slice(), &[EdgeId(1)]);
        assert_eq!(t.noise.as_slice(), &[EdgeId(2)]);
    }

    #[test]
    fn jaccard_one_third_and_empty_pairs() {
        let (_, v) = fixture();
        let views = vec![with_edges(&v, &[0, 1]), with_edges(&v, &[1, 2])];
        assert!((pairwise_jaccard(&views).unwrap().mean.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let empties = vec![with_edges(&v, &[]), with_edges(&v, &[]), with_edges(&v, &[4])];
        let s = pairwise_jaccard(&empties).unwrap();
        assert_eq!(s.skipped_pairs, 1);
        assert_eq!(s.mean, Some(0.0));
    }

    #[test]
    fn three_view_leave_one_out_has_two_bins() {
        let (_, v) = fixture();
        let views = vec![with_edges(&v, &[0, 1, 2]), with_edges(&v, &[0, 2, 3]), with_edges(&v, &[0, 1, 4])];
        let bins = leave_one_out(&views).unwrap();
        assert!(bins.len() <= 2);
        assert!(bins.iter().all(|b| b.score == 0.5 || b.score == 1.0));
    }

    #[test]
    fn stability_document_round_trip() {
        let (g, v) = fixture();
        let views = vec![with_edges(&v, &[0, 1, 2]), with_edges(&v, &[0, 5])];
        let r = stability_scores(&g, &views).unwrap();
        let doc = r.to_document(&g);
        let json = serde_json::to_string(&doc).unwrap();
        let back: StabilityDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(StabilityReport::from_document(&back, &g).unwrap(), r);
    }

    #[test]
    fn bootstrap_identical_views_collapse() {
        let (g, v) = fixture();
        let views = vec![v.clone(); 5];
        let s = bootstrap_consensus(&views, &g, 50, 3).unwrap();
        assert_eq!(s.size_ci.low, v.edges.len() as f64);
        assert_eq!(s.size_ci.high, v.edges.len() as f64);
        assert_eq!(s.ir_ci.low, s.ir_point);
        assert_eq!(s.ir_ci.high, s.ir_point);
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let g = generate_synthetic(&SyntheticSpec::default().with_seed(4)).unwrap();
        let inf = compute_influence(&g);
        let family = grid_family(&linspace(0.5, 0.9, 5), &linspace(0.95, 0.99, 5)).unwrap();
        let views = Pruner::new(&g, &inf).apply_all(&family).unwrap();
        let a = bootstrap_consensus(&views, &g, 100, 11).unwrap();
        let b = bootstrap_consensus(&views, &g, 100, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.size_point_in_ci && a.ir_point_in_ci, "{a:?}");
    }

    #[test]
    fn percentile_interpolates() {
        let data = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&data, 0.0), 0.0);
        assert_eq!(percentile(&data, 1.0), 4.0);
        assert_eq!(percentile(&data, 0.5), 2.0);
        assert!((percentile(&data, 0.025) - 0.1).abs() < 1e-12);
    }
}
