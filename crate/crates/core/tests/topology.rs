mod common;

use apdp::topology::{all_pairs_shortest, minimum_spanning_tree, mst_weight, TopologyError, BUNDLED_TOPOLOGIES};
use apdp::Topology;
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_match_dijkstra_and_path_enumeration(seed in any::<u64>(), n in 2usize..8, extra in 0usize..8) {
        let doc = random_doc(&mut rng(seed), n, extra);
        let m = all_pairs_shortest(n, &doc.edges);
        for a in 0..n {
            let d = dijkstra(n, &doc.edges, a);
            for b in 0..n {
                prop_assert_eq!(m.get(a, b), d[b]);
                prop_assert_eq!(m.get(a, b), shortest_by_paths(n, &doc.edges, a, b));
            }
        }
    }

    #[test]
    fn prim_matches_spanning_tree_enumeration(seed in any::<u64>(), k in 1usize..7) {
        let topo = random_topology(&mut rng(seed), 9, 6);
        let mut r = rng(seed ^ 1);
        let nodes: Vec<usize> = (0..k).map(|_| rand::Rng::gen_range(&mut r, 0..9)).collect();
        let mut unique = nodes.clone();
        unique.sort_unstable();
        unique.dedup();
        let tree = minimum_spanning_tree(&nodes, topo.dist()).unwrap();
        prop_assert_eq!(tree.edges.len(), unique.len() - 1);
        prop_assert!((tree.weight - spanning_tree_by_enumeration(&unique, topo.dist())).abs() < 1e-9);
        let sum: f64 = tree.edges.iter().map(|e| e.2).sum();
        prop_assert!((sum - tree.weight).abs() < 1e-9);
    }
}

#[test]
fn bundled_topologies_are_connected_metrics() {
    for name in BUNDLED_TOPOLOGIES {
        let t = Topology::bundled(name).unwrap();
        let n = t.num_cities();
        assert!(n >= 5, "{name}");
        for a in 0..n {
            assert_eq!(t.distance(a, a), 0.0);
            assert!(!t.neighbors(a).is_empty());
            for b in 0..n {
                let d = t.distance(a, b);
                assert!(d.is_finite() && d == t.distance(b, a), "{name} {a} {b}");
                for c in 0..n {
                    assert!(d <= t.distance(a, c) + t.distance(c, b) + 1e-9, "{name}: triangle {a} {c} {b}");
                }
            }
        }
        let back = Topology::from_doc(t.to_doc()).unwrap();
        assert_eq!(back.dist(), t.dist());
        assert_eq!(Topology::resolve(name).unwrap().name(), t.name());
    }
}

#[test]
fn disconnected_and_empty_inputs_are_rejected() {
    let mut doc = random_doc(&mut rng(3), 4, 0);
    doc.edges.retain(|e| e.a != 3 && e.b != 3);
    assert!(Topology::from_doc(doc).is_err());
    assert!(matches!(mst_weight(&[], Topology::bundled("france").unwrap().dist()), Err(TopologyError::EmptyCitySet)));
    assert!(Topology::resolve("no-such-place").is_err());
    assert!(Topology::from_json("{").is_err());
}
