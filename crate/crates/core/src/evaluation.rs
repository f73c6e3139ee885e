//! Baselines, win counting, aggregation-rule comparisons and the tables
//! behind the stability/influence and stability/coverage plots.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edge_set::{EdgeId, EdgeSet};
use crate::ensemble::{consensus, StabilityReport};
use crate::error::{Error, Result};
use crate::graph::AttributionGraph;
use crate::influence::{influence_retained, InfluenceMap};
use crate::pruning::{rank_by_score, View};

/// Quantity used to rank union edges for the union-pruned baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    /// Propagated edge influence, the same quantity pruning uses.
    #[default]
    Influence,
    /// Raw `|w|`.
    AbsWeight,
}

impl RankBy {
    pub fn scores(self, g: &AttributionGraph, inf: &InfluenceMap) -> Vec<f64> {
        match self {
            RankBy::Influence => inf.edge_influence().to_vec(),
            RankBy::AbsWeight => g.abs_weights(),
        }
    }
}

fn check_budget(report: &StabilityReport, k: usize) -> Result<()> {
    if k > report.union().len() {
        return Err(Error::BudgetTooLarge { k, available: report.union().len() });
    }
    Ok(())
}

fn top_k(candidates: &EdgeSet, k: usize, score: impl Fn(EdgeId) -> f64) -> EdgeSet {
    let mut order: Vec<EdgeId> = candidates.iter().collect();
    rank_by_score(&mut order, score);
    order.truncate(k);
    order.into_iter().collect()
}

/// Top-`k` union edges by `scores` (indexed by [`EdgeId`]).
pub fn union_pruned_baseline(report: &StabilityReport, scores: &[f64], k: usize) -> Result<EdgeSet> {
    check_budget(report, k)?;
    Ok(top_k(report.union(), k, |e| scores[e.index()]))
}

/// `seeds` uniform `k`-subsets of the union. Draw `i` uses ChaCha stream `i`
/// of `seed0`.
pub fn random_baseline(report: &StabilityReport, k: usize, seeds: usize, seed0: u64) -> Result<Vec<EdgeSet>> {
    check_budget(report, k)?;
    let union = report.union().as_slice();
    Ok((0..seeds)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed0);
            rng.set_stream(i as u64);
            sample(&mut rng, union.len(), k).into_iter().map(|j| union[j]).collect()
        })
        .collect())
}

/// Top-`k` union edges by `s(e)·inf(e)`.
pub fn aggregate_stability_times_influence(report: &StabilityReport, inf: &InfluenceMap, k: usize) -> Result<EdgeSet> {
    check_budget(report, k)?;
    Ok(top_k(report.union(), k, |e| report.score(e) * inf.edge(e)))
}

/// IR of one view.
pub fn view_ir(g: &AttributionGraph, view: &View) -> Result<f64> {
    influence_retained(g, &view.edges)
}

/// Best single view by IR, first index on ties.
pub fn oracle_best_config(views: &[View], g: &AttributionGraph) -> Result<(usize, f64)> {
    if views.is_empty() {
        return Err(Error::TooFewViews { required: 1, got: 0 });
    }
    let mut best = (0, view_ir(g, &views[0])?);
    for (i, v) in views.iter().enumerate().skip(1) {
        let ir = view_ir(g, v)?;
        if ir > best.1 {
            best = (i, ir);
        }
    }
    Ok(best)
}

/// Largest attainable τ with IR(C_τ) ≥ IR* − `margin`, where IR* is the best
/// single-view IR; 1/B when no τ qualifies.
pub fn tau_adaptive(report: &StabilityReport, g: &AttributionGraph, views: &[View], margin: f64) -> Result<f64> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be nonnegative, got {margin}")));
    }
    let (_, best) = oracle_best_config(views, g)?;
    let b = report.views();
    for k in (1..=b).rev() {
        let tau = k as f64 / b as f64;
        if influence_retained(g, &consensus(report, tau)?)? >= best - margin {
            return Ok(tau);
        }
    }
    Ok(1.0 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceBin {
    pub k: u32,
    pub score: f64,
    pub edge_count: usize,
    pub mean_influence: f64,
}

/// Mean edge influence per attainable score `k/B`, empty bins omitted.
pub fn stability_influence_bins(report: &StabilityReport, inf: &InfluenceMap) -> Vec<InfluenceBin> {
    let b = report.views();
    let mut sums = vec![0.0; b + 1];
    let mut counts = vec![0usize; b + 1];
    for e in report.union().iter() {
        let k = report.count(e) as usize;
        sums[k] += inf.edge(e);
        counts[k] += 1;
    }
    (1..=b)
        .filter(|&k| counts[k] > 0)
        .map(|k| InfluenceBin {
            k: k as u32,
            score: k as f64 / b as f64,
            edge_count: counts[k],
            mean_influence: sums[k] / counts[k] as f64,
        })
        .collect()
}

/// Whether mean influence never decreases from one occupied bin to the next.
pub fn bins_nondecreasing(bins: &[InfluenceBin]) -> bool {
    bins.windows(2).all(|w| w[0].mean_influence <= w[1].mean_influence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub size: usize,
    pub ir: f64,
}

/// (τ, |C_τ|, IR(C_τ)) for every attainable τ = k/B, ascending.
pub fn coverage_curve(report: &StabilityReport, g: &AttributionGraph) -> Result<Vec<CurvePoint>> {
    let b = report.views();
    // Accumulate from τ = 1 downwards so each C_τ is a running superset.
    let mut by_count: Vec<Vec<EdgeId>> = vec![Vec::new(); b + 1];
    for e in report.union().iter() {
        by_count[report.count(e) as usize].push(e);
    }
    let total = g.total_abs_weight();
    if total <= 0.0 {
        return Err(Error::UndefinedInfluenceRetained);
    }
    let mut points = Vec::with_capacity(b);
    let (mut size, mut phi) = (0usize, 0.0);
    for k in (1..=b).rev() {
        size += by_count[k].len();
        phi += by_count[k].iter().map(|&e| g.edge(e).weight.abs()).sum::<f64>();
        let ir = if size == g.edge_count() { 1.0 } else { (phi / total).min(1.0) };
        points.push(CurvePoint { tau: k as f64 / b as f64, size, ir });
    }
    points.reverse();
    Ok(points)
}

/// Strict win/tie/loss counts of consensus against one baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WinTally {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

impl WinTally {
    pub fn total(&self) -> usize {
        self.wins + self.ties + self.losses
    }

    pub fn record(&mut self, consensus: f64, baseline: f64) {
        if consensus > baseline {
            self.wins += 1;
        } else if consensus == baseline {
            self.ties += 1;
        } else {
            self.losses += 1;
        }
    }

    pub fn fraction(&self) -> String {
        format!("{}/{}", self.wins, self.total())
    }
}

/// IR of consensus and of both baselines on one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IrTriple {
    pub consensus: f64,
    pub union_pruned: f64,
    pub random_mean: f64,
}

/// (W-UP, W-Rand).
pub fn win_rates(records: &[IrTriple]) -> (WinTally, WinTally) {
    let mut up = WinTally::default();
    let mut rand = WinTally::default();
    for r in records {
        up.record(r.consensus, r.union_pruned);
        rand.record(r.consensus, r.random_mean);
    }
    (up, rand)
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
