//! Consensus circuits under pruning uncertainty.
//!
//! One attribution graph is pruned under `B` threshold configurations.
//! Each edge gets a stability score (the fraction of views keeping it), the
//! strict consensus keeps edges present in every view, and union edges are
//! split into core, contingent and noise tiers. The [`evaluation`] module
//! compares consensus against influence-ranked and random baselines.
//!
//! ```
//! use circuit_consensus::prelude::*;
//!
//! let g = generate_synthetic(&SyntheticSpec::default()).unwrap();
//! let inf = compute_influence(&g);
//! let family = non_nested_family(&[0.6, 0.9], &[0.95, 0.99]).unwrap();
//! let views = Pruner::new(&g, &inf).apply_all(&family).unwrap();
//! let report = stability_scores(&g, &views).unwrap();
//! let core = consensus(&report, 1.0).unwrap();
//! assert!(influence_retained(&g, &core).unwrap() <= 1.0);
//! ```

pub mod bench;
pub mod boosting;
pub mod edge_set;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod influence;
pub mod pipeline;
pub mod pruning;
pub mod synthetic;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::boosting::{boost, post_prune, residual_graph, BoostResult};
    pub use crate::edge_set::{EdgeId, EdgeSet, NodeId};
    pub use crate::ensemble::{
        bootstrap_consensus, classify, classify_with, consensus, leave_one_out, match_single_config,
        pairwise_jaccard, stability_scores, StabilityReport, Taxonomy, TaxonomyBounds,
    };
    pub use crate::evaluation::{
        aggregate_stability_times_influence, coverage_curve, oracle_best_config, random_baseline,
        stability_influence_bins, tau_adaptive, union_pruned_baseline, win_rates, RankBy,
    };
    pub use crate::graph::{load_graph, save_graph, validate, AttributionGraph, NodeKind, PlantedTier};
    pub use crate::influence::{
        compute_influence, influence_retained, kl_divergence, logit_distribution, InfluenceMap,
        LogitDistribution, PerLogitInfluence,
    };
    pub use crate::pruning::{
        apply_config, grid_family, is_nested_chain, non_nested_family, Pruner, PruningConfig, View,
    };
    pub use crate::synthetic::{generate_synthetic, SyntheticSpec};
    pub use crate::{Error, Result};
}
