//! Property tests over randomly built graphs.

use proptest::prelude::*;

use flowsched::graph::{topological_order, NodeKind, TaskGraph};
use flowsched::rational::Rate;

/// Arbitrary small canonical-ish DAG: layered nodes, random rates, volumes
/// forced consistent by construction (every node's inputs share one class).
fn arb_canonical_graph() -> impl Strategy<Value = TaskGraph> {
    (2usize..10, any::<u64>()).prop_map(|(n, seed)| {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Chain backbone with random power-of-two volumes and occasional
        // extra forward edges onto the chain successor's class.
        let vols: Vec<u64> = (0..n).map(|_| 1u64 << rng.gen_range(2..8)).collect();
        let mut b = TaskGraph::builder().source("n00");
        for i in 1..n - 1 {
            b = b.node(
                format!("n{i:02}"),
                NodeKind::Compute(Rate::new(vols[i], vols[i - 1]).unwrap()),
            );
        }
        b = b.sink(format!("n{:02}", n - 1));
        for (i, &vol) in vols.iter().enumerate().take(n - 1) {
            b = b.edge(format!("n{i:02}"), format!("n{:02}", i + 1), vol);
        }
        b.build().unwrap()
    })
}

proptest! {
    #[test]
    fn json_round_trip_preserves_structure(g in arb_canonical_graph()) {
        let text = g.to_json();
        let back = TaskGraph::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.node_count(), g.node_count());
        prop_assert_eq!(back.edge_count(), g.edge_count());
    }

    #[test]
    fn generated_graphs_validate_and_derive_volumes(g in arb_canonical_graph()) {
        prop_assert!(g.validate().is_ok(), "{}", g.validate());
        for v in g.node_indices() {
            if let Some(rate) = g.kind(v).rate() {
                prop_assert_eq!(rate.apply(g.k_in(v)), Some(g.k_out(v)));
            }
        }
    }

    #[test]
    fn topological_order_is_complete_and_forward(g in arb_canonical_graph()) {
        let order = topological_order(&g).unwrap();
        prop_assert_eq!(order.len(), g.node_count());
        let pos: std::collections::HashMap<_, _> =
            order.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        for e in g.edges() {
            prop_assert!(pos[&e.src] < pos[&e.dst]);
        }
    }

    #[test]
    fn split_preserves_non_buffer_nodes_and_edges(g in arb_canonical_graph()) {
        let split = flowsched::split_buffers(&g).unwrap();
        let buffers = g.node_indices().filter(|v| g.is_buffer(*v)).count();
        prop_assert_eq!(split.nodes.len(), g.node_count() + buffers);
        prop_assert_eq!(split.edges.len(), g.edge_count());
    }
}
