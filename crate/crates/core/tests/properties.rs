mod common;

use circuit_consensus::prelude::*;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_from(seed: u64) -> AttributionGraph {
    small_graph(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ir_is_monotone_under_inclusion(seed in any::<u64>(), p in 0.0..1.0f64, q in 0.0..1.0f64) {
        let g = graph_from(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let small = random_subset(&mut rng, &g, p * q);
        let large = small.union(&random_subset(&mut rng, &g, p));
        prop_assert!(influence_retained(&g, &small).unwrap() <= influence_retained(&g, &large).unwrap());
    }

    #[test]
    fn ir_ignores_weight_scale(seed in any::<u64>(), c in 1e-3..1e3f64, p in 0.0..1.0f64) {
        let g = graph_from(seed);
        let scaled = with_scaled_weights(&g, c);
        let s = random_subset(&mut ChaCha8Rng::seed_from_u64(seed ^ 2), &g, p);
        let a = influence_retained(&g, &s).unwrap();
        let b = influence_retained(&scaled, &s).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn same_direction_configs_nest(seed in any::<u64>(), n in 0.1..1.0f64, e in 0.1..1.0f64, dn in 0.0..0.5f64, de in 0.0..0.5f64) {
        let g = graph_from(seed);
        let inf = compute_influence(&g);
        let tight = apply_config(&g, &inf, &PruningConfig::new(n, e).unwrap()).unwrap();
        let loose = apply_config(&g, &inf, &PruningConfig::new((n + dn).min(1.0), (e + de).min(1.0)).unwrap()).unwrap();
        prop_assert!(tight.edges.is_subset(&loose.edges));
    }

    #[test]
    fn taxonomy_partitions_the_union(seed in any::<u64>(), b in 1usize..10) {
        let g = graph_from(seed);
        let inf = compute_influence(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let configs: Vec<PruningConfig> = (0..b).map(|_| random_config(&mut rng)).collect();
        let views = Pruner::new(&g, &inf).apply_all(&configs).unwrap();
        let report = stability_scores(&g, &views).unwrap();
        let t = classify(&report);
        prop_assert!(t.core.is_disjoint(&t.contingent));
        prop_assert!(t.core.is_disjoint(&t.noise));
        prop_assert!(t.contingent.is_disjoint(&t.noise));
        prop_assert_eq!(&t.core.union(&t.contingent).union(&t.noise), report.union());
        prop_assert_eq!(&t.core, &consensus(&report, 1.0).unwrap());
    }

    #[test]
    fn consensus_shrinks_as_tau_grows(seed in any::<u64>(), b in 2usize..10, t1 in 0.01..1.0f64, t2 in 0.01..1.0f64) {
        let g = graph_from(seed);
        let inf = compute_influence(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let configs: Vec<PruningConfig> = (0..b).map(|_| random_config(&mut rng)).collect();
        let views = Pruner::new(&g, &inf).apply_all(&configs).unwrap();
        let report = stability_scores(&g, &views).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(consensus(&report, hi).unwrap().is_subset(&consensus(&report, lo).unwrap()));
        let c1 = consensus(&report, 1.0).unwrap();
        prop_assert!(views.iter().all(|v| c1.is_subset(&v.edges)));
    }

    #[test]
    fn stability_document_round_trips(seed in any::<u64>(), b in 1usize..6) {
        let g = graph_from(seed);
        let inf = compute_influence(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        let configs: Vec<PruningConfig> = (0..b).map(|_| random_config(&mut rng)).collect();
        let views = Pruner::new(&g, &inf).apply_all(&configs).unwrap();
        let report = stability_scores(&g, &views).unwrap();
        let doc = report.to_document(&g);
        let json = serde_json::to_vec(&doc).unwrap();
        let back = StabilityReport::from_document(&serde_json::from_slice(&json).unwrap(), &g).unwrap();
        prop_assert_eq!(back.union(), report.union());
        for e in g.edge_ids() {
            prop_assert_eq!(back.count(e), report.count(e));
        }
    }
}
