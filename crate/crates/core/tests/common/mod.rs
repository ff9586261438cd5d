//! Helpers shared by the integration test targets.

use flowsched::graph::{NodeKind, TaskGraph};
use flowsched::rational::{q, Q};

/// Independent steady-state oracle: start every interval at 1 and repeatedly
/// apply the local balance rules (edge endpoints agree; a compute node's
/// output interval is its input interval over the rate), taking maxima until
/// a fixed point. Knows nothing about components or maximum volumes.
pub fn fixed_point_oracle(graph: &TaskGraph) -> Vec<(Q, Q)> {
    let n = graph.node_count();
    let mut si_in = vec![q(1); n];
    let mut si_out = vec![q(1); n];
    let max_passes = 10 * (n + graph.edge_count()) + 10;
    let mut converged = false;
    for _ in 0..max_passes {
        let mut changed = false;
        let mut raise = |slot: &mut Q, value: Q| {
            if value > *slot {
                *slot = value;
                changed = true;
            }
        };
        for e in graph.edges() {
            let m = si_out[e.src.idx()].max(si_in[e.dst.idx()]);
            raise(&mut si_out[e.src.idx()], m);
            raise(&mut si_in[e.dst.idx()], m);
        }
        for v in graph.node_indices() {
            if let NodeKind::Compute(r) = graph.kind(v) {
                let rate = r.as_q();
                let out_req = si_in[v.idx()] / rate;
                raise(&mut si_out[v.idx()], out_req);
                let in_req = si_out[v.idx()] * rate;
                raise(&mut si_in[v.idx()], in_req);
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    assert!(converged, "oracle did not reach a fixed point");
    for v in graph.node_indices() {
        if graph.in_edges(v).is_empty() {
            si_in[v.idx()] = si_out[v.idx()];
        }
        if graph.out_edges(v).is_empty() {
            si_out[v.idx()] = si_in[v.idx()];
        }
    }
    si_in.into_iter().zip(si_out).collect()
}
