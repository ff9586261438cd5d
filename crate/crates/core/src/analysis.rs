//! Steady-state analysis of canonical task graphs.
//!
//! At steady state the output streaming interval of a node is the largest
//! output volume in its weakly connected component of the buffer-split graph
//! divided by the node's own output volume. Levels generalize the classical
//! depth by charging `max(R, 1)` per hop, and the streaming depth combines
//! per-component depths along the component DAG formed by split buffers.

use std::collections::BTreeSet;

use crate::error::CoreError;
use crate::graph::{NodeIdx, NodeKind, SplitPart, SplitView, TaskGraph, Volume};
use crate::rational::{ceil_u64, q, Q};

/// Input/output streaming interval of one node (time units per element).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiPair {
    pub si_in: Q,
    pub si_out: Q,
}

/// Per-node streaming intervals.
///
/// With `restrict_to` the analysis runs on the induced subgraph, treating
/// subset-crossing edges as buffered: an external input behaves like a
/// memory stream of the node's input volume, so it contributes `k_in` to the
/// component's maximum volume. Sinks report `si_out = si_in`, sources
/// `si_in = si_out` (neither side exists physically).
pub fn streaming_intervals(
    graph: &TaskGraph,
    restrict_to: Option<&BTreeSet<NodeIdx>>,
) -> Result<Vec<Option<SiPair>>, CoreError> {
    let view = SplitView::new(graph, restrict_to);
    let contains = |v: NodeIdx| restrict_to.is_none_or(|s| s.contains(&v));

    // Maximum output volume per component. Buffer tails and sinks produce
    // nothing; external inputs add the reader's input volume.
    let mut max_vol: Vec<Volume> = vec![0; view.component_count];
    for (i, &(origin, part)) in view.nodes.iter().enumerate() {
        let c = view.component[i];
        let vol = match part {
            SplitPart::Whole | SplitPart::Head => graph.k_out(origin),
            SplitPart::Tail => 0,
        };
        max_vol[c] = max_vol[c].max(vol);
    }
    if restrict_to.is_some() {
        for v in graph.node_indices() {
            if !contains(v) {
                continue;
            }
            let has_external_pred = graph.preds(v).any(|p| !contains(p));
            if has_external_pred {
                let input_side = match view.whole[v.idx()] {
                    Some(i) => i,
                    None => view.halves[v.idx()].expect("buffer halves exist").0,
                };
                let c = view.component[input_side];
                max_vol[c] = max_vol[c].max(graph.k_in(v));
            }
        }
    }

    let mut out: Vec<Option<SiPair>> = vec![None; graph.node_count()];
    for v in graph.node_indices() {
        if !contains(v) {
            continue;
        }
        let (in_side, out_side) = match view.whole[v.idx()] {
            Some(i) => (i, i),
            None => {
                let (tail, head) = view.halves[v.idx()].expect("buffer halves exist");
                (tail, head)
            }
        };
        let k_in = graph.k_in(v);
        let k_out = graph.k_out(v);
        let si_out = if k_out > 0 {
            let m = max_vol[view.component[out_side]];
            if m == 0 {
                return Err(CoreError::Invariant(format!(
                    "component of `{}` has no producing node",
                    graph.name(v)
                )));
            }
            Some(Q::new(m as i128, k_out as i128))
        } else if !matches!(graph.kind(v), NodeKind::Sink) {
            return Err(CoreError::Invariant(format!(
                "node `{}` has k_out = 0 but is not a sink",
                graph.name(v)
            )));
        } else {
            None
        };
        let si_in = if k_in > 0 {
            let m = max_vol[view.component[in_side]];
            Some(Q::new(m.max(k_in) as i128, k_in as i128))
        } else {
            None
        };
        let pair = match (si_in, si_out) {
            (Some(i), Some(o)) => SiPair { si_in: i, si_out: o },
            (None, Some(o)) => SiPair { si_in: o, si_out: o },
            (Some(i), None) => SiPair { si_in: i, si_out: i },
            (None, None) => SiPair {
                si_in: q(1),
                si_out: q(1),
            },
        };
        out[v.idx()] = Some(pair);
    }
    Ok(out)
}

/// Node levels on the whole graph: 1 for parentless nodes, otherwise
/// `max(R, 1)` plus the deepest predecessor level. Sources, sinks and
/// buffers charge 1 per hop like element-wise nodes... buffers keep their
/// rate charge since an upsampling buffer still emits `R` elements per input.
pub fn node_levels(graph: &TaskGraph) -> Result<Vec<Q>, CoreError> {
    let order = crate::graph::topological_order(graph)?;
    let mut level = vec![q(0); graph.node_count()];
    for v in order {
        let bump = match graph.kind(v) {
            NodeKind::Compute(r) | NodeKind::Buffer(r) => r.as_q().max(q(1)),
            NodeKind::Source | NodeKind::Sink => q(1),
        };
        let best_pred = graph.preds(v).map(|p| level[p.idx()]).max();
        level[v.idx()] = match best_pred {
            None => q(1),
            Some(l) => bump + l,
        };
    }
    Ok(level)
}

/// Per-node work and total work.
#[derive(Clone, Debug)]
pub struct WorkProfile {
    /// `max(k_in, k_out)` for PE-occupying nodes, 0 for buffers.
    pub per_node: Vec<Volume>,
    /// Total single-PE execution time.
    pub t1: u64,
}

/// Work of each node and the sequential execution time `t1`. Buffer nodes
/// are passive and contribute nothing.
pub fn work(graph: &TaskGraph) -> Result<WorkProfile, CoreError> {
    let mut per_node = vec![0u64; graph.node_count()];
    let mut t1: u64 = 0;
    for v in graph.node_indices() {
        if graph.is_buffer(v) {
            continue;
        }
        let w = graph.k_in(v).max(graph.k_out(v));
        per_node[v.idx()] = w;
        t1 = t1.checked_add(w).ok_or(CoreError::Overflow("t1"))?;
    }
    Ok(WorkProfile { per_node, t1 })
}

/// One weakly connected component of the buffer-split graph, merged into a
/// supernode.
#[derive(Clone, Debug)]
pub struct Supernode {
    /// Original node ids of the members (buffers appear in both the
    /// component of their tail and of their head).
    pub members: Vec<NodeIdx>,
    /// Largest output volume produced inside the component.
    pub max_volume: Volume,
    /// Number of levels of the component as a standalone graph.
    pub levels: Q,
    /// Streaming depth contribution: `max_volume + levels - 1`.
    pub depth: Q,
}

/// DAG of supernodes connected through split buffers.
#[derive(Clone, Debug)]
pub struct SupernodeDag {
    pub supernodes: Vec<Supernode>,
    /// Edges `(tail component, head component)`, one entry per buffer.
    pub edges: Vec<(usize, usize)>,
    /// Deepest path weight, summing member depths.
    pub critical_depth: Q,
    /// Largest total level count along any path (slack of the depth bound).
    pub hat_l: Q,
}

/// Builds the supernode DAG of the buffer-split graph. Fails when the
/// buffer-placement rule is violated (the component graph has a cycle).
pub fn supernode_dag(graph: &TaskGraph) -> Result<SupernodeDag, CoreError> {
    graph.ensure_valid()?;
    let view = SplitView::new(graph, None);
    let nc = view.component_count;

    let mut members: Vec<BTreeSet<NodeIdx>> = vec![BTreeSet::new(); nc];
    let mut max_vol: Vec<Volume> = vec![0; nc];
    for (i, &(origin, part)) in view.nodes.iter().enumerate() {
        let c = view.component[i];
        members[c].insert(origin);
        if !matches!(part, SplitPart::Tail) {
            max_vol[c] = max_vol[c].max(graph.k_out(origin));
        }
    }

    // Levels inside each component, on the split nodes. Heads and other
    // parentless split nodes start at level 1.
    let mut indeg = vec![0usize; view.nodes.len()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); view.nodes.len()];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); view.nodes.len()];
    for &(s, d, _) in &view.edges {
        indeg[d] += 1;
        succs[s].push(d);
        preds[d].push(s);
    }
    let mut stack: Vec<usize> = (0..view.nodes.len()).filter(|i| indeg[*i] == 0).collect();
    let mut order = Vec::with_capacity(view.nodes.len());
    while let Some(i) = stack.pop() {
        order.push(i);
        for &d in &succs[i] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                stack.push(d);
            }
        }
    }
    debug_assert_eq!(order.len(), view.nodes.len(), "split graph is acyclic");
    let mut level = vec![q(0); view.nodes.len()];
    for &i in &order {
        let (origin, part) = view.nodes[i];
        let bump = match (part, graph.kind(origin)) {
            (SplitPart::Whole, NodeKind::Compute(r)) => r.as_q().max(q(1)),
            _ => q(1),
        };
        level[i] = match preds[i].iter().map(|p| level[*p]).max() {
            None => q(1),
            Some(l) => bump + l,
        };
    }
    let mut comp_levels = vec![q(0); nc];
    for (i, &c) in view.component.iter().enumerate() {
        comp_levels[c] = comp_levels[c].max(level[i]);
    }

    let supernodes: Vec<Supernode> = (0..nc)
        .map(|c| Supernode {
            members: members[c].iter().copied().collect(),
            max_volume: max_vol[c],
            levels: comp_levels[c],
            depth: q(max_vol[c]) + comp_levels[c] - q(1),
        })
        .collect();

    let mut edges = Vec::new();
    for v in graph.node_indices() {
        if let Some((tail, head)) = view.halves[v.idx()] {
            edges.push((view.component[tail], view.component[head]));
        }
    }

    // Deepest weighted path and largest level sum over the component DAG.
    let mut comp_preds: Vec<Vec<usize>> = vec![Vec::new(); nc];
    let mut comp_indeg = vec![0usize; nc];
    for &(s, d) in &edges {
        comp_preds[d].push(s);
        comp_indeg[d] += 1;
    }
    let mut comp_succ: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for &(s, d) in &edges {
        comp_succ[s].push(d);
    }
    let mut stack: Vec<usize> = (0..nc).filter(|c| comp_indeg[*c] == 0).collect();
    let mut comp_order = Vec::with_capacity(nc);
    while let Some(c) = stack.pop() {
        comp_order.push(c);
        for &d in &comp_succ[c] {
            comp_indeg[d] -= 1;
            if comp_indeg[d] == 0 {
                stack.push(d);
            }
        }
    }
    if comp_order.len() != nc {
        return Err(CoreError::Invariant(
            "component DAG has a cycle despite validation".into(),
        ));
    }
    let mut depth_to = vec![q(0); nc];
    let mut levels_to = vec![q(0); nc];
    for &c in &comp_order {
        let best_d = comp_preds[c].iter().map(|p| depth_to[*p]).max();
        let best_l = comp_preds[c].iter().map(|p| levels_to[*p]).max();
        depth_to[c] = supernodes[c].depth + best_d.unwrap_or(q(0));
        levels_to[c] = supernodes[c].levels + best_l.unwrap_or(q(0));
    }
    let critical_depth = depth_to.iter().copied().max().unwrap_or(q(0));
    let hat_l = levels_to.iter().copied().max().unwrap_or(q(0));

    Ok(SupernodeDag {
        supernodes,
        edges,
        critical_depth,
        hat_l,
    })
}

/// Streaming depth of the graph: the deepest path in the supernode DAG,
/// weighting each component by `max_volume + levels - 1`. For a buffer-free
/// element-wise graph this is exactly `k + level(G) - 1`.
pub fn streaming_depth(graph: &TaskGraph) -> Result<u64, CoreError> {
    Ok(ceil_u64(supernode_dag(graph)?.critical_depth))
}

/// Complete steady-state analysis of a validated graph.
#[derive(Clone, Debug)]
pub struct StreamAnalysis {
    pub si: Vec<SiPair>,
    /// Component id on the buffer-split graph (buffers report the component
    /// of their tail half).
    pub wcc_id: Vec<usize>,
    pub level: Vec<Q>,
    pub work: Vec<Volume>,
    pub t1: u64,
    pub streaming_depth: u64,
    pub supernodes: SupernodeDag,
}

pub fn analyze(graph: &TaskGraph) -> Result<StreamAnalysis, CoreError> {
    graph.ensure_valid()?;
    let si = streaming_intervals(graph, None)?
        .into_iter()
        .map(|p| p.expect("unrestricted analysis covers every node"))
        .collect();
    let view = SplitView::new(graph, None);
    let wcc_id = graph
        .node_indices()
        .map(|v| {
            let side = view.whole[v.idx()]
                .unwrap_or_else(|| view.halves[v.idx()].expect("buffer halves").0);
            view.component[side]
        })
        .collect();
    let level = node_levels(graph)?;
    let profile = work(graph)?;
    let supernodes = supernode_dag(graph)?;
    let streaming_depth = ceil_u64(supernodes.critical_depth);
    Ok(StreamAnalysis {
        si,
        wcc_id,
        level,
        work: profile.per_node,
        t1: profile.t1,
        streaming_depth,
        supernodes,
    })
}
