//! Streaming intervals against an independent fixed-point oracle.
//!
//! The oracle knows nothing about components or maximum volumes: it starts
//! every interval at 1 and repeatedly applies the two local balance rules
//! (edge endpoints agree; a compute node's output interval is its input
//! interval divided by the rate), taking maxima until nothing changes. The
//! least fixed point of that relaxation is the steady state the closed form
//! must reproduce, exactly, in rational arithmetic.

mod common;

use common::fixed_point_oracle;
use flowsched::analysis::streaming_intervals;
use flowsched::generators::{random_dag, RandomDagConfig, RandomMode};
use flowsched::graph::TaskGraph;
use flowsched::rational::q;

fn check_graph(graph: &TaskGraph) {
    let got = streaming_intervals(graph, None).unwrap();
    let want = fixed_point_oracle(graph);
    for v in graph.node_indices() {
        let pair = got[v.idx()].unwrap();
        assert_eq!(
            (pair.si_in, pair.si_out),
            want[v.idx()],
            "node `{}`",
            graph.name(v)
        );
    }
}

#[test]
fn closed_form_matches_fixed_point_on_random_graphs() {
    for seed in 0..500u64 {
        let nodes = 3 + (seed % 10) as u32;
        let g = random_dag(&RandomDagConfig {
            nodes,
            mode: RandomMode::General,
            volume_range: (4, 256),
            seed,
        })
        .unwrap();
        check_graph(&g);
    }
}

#[test]
fn closed_form_matches_fixed_point_on_named_shapes() {
    let upsampler_pair = TaskGraph::builder()
        .source("u")
        .compute("v", 4, 1)
        .sink("z")
        .edge("u", "v", 8)
        .edge("v", "z", 32)
        .build()
        .unwrap();
    check_graph(&upsampler_pair);

    let fork_join = TaskGraph::builder()
        .source("n0")
        .compute("n1", 1, 8)
        .compute("n2", 1, 2)
        .compute("n3", 16, 1)
        .sink("n4")
        .edge("n0", "n1", 32)
        .edge("n0", "n4", 32)
        .edge("n1", "n2", 4)
        .edge("n2", "n3", 2)
        .edge("n3", "n4", 32)
        .build()
        .unwrap();
    check_graph(&fork_join);
}

#[test]
fn intervals_at_least_one_and_scale_free_in_components() {
    for seed in 0..100u64 {
        let g = random_dag(&RandomDagConfig {
            nodes: 12,
            mode: RandomMode::General,
            volume_range: (8, 128),
            seed: seed.wrapping_mul(977),
        })
        .unwrap();
        let si = streaming_intervals(&g, None).unwrap();
        let analysis = flowsched::analysis::analyze(&g).unwrap();
        for v in g.node_indices() {
            let pair = si[v.idx()].unwrap();
            assert!(pair.si_in >= q(1) && pair.si_out >= q(1));
            if g.k_out(v) > 0 {
                // Constant product per component, and the largest producer
                // streams at interval exactly one.
                let c = analysis.wcc_id[v.idx()];
                let prod = pair.si_out * q(g.k_out(v));
                let max_vol = analysis.supernodes.supernodes[c].max_volume;
                assert_eq!(prod, q(max_vol));
            }
        }
    }
}
