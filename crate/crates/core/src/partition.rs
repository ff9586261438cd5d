//! Spatial-block partitioning.
//!
//! Scheduling temporally multiplexes the graph as an ordered sequence of
//! spatial blocks, each holding at most `P` PE-occupying tasks that are
//! co-scheduled and may stream to each other. Blocks execute back to back,
//! so inter-block dependencies must respect the block order.
//!
//! Two partitioners exist for general graphs (a strict and a relaxed greedy
//! variant differing in how they treat candidates that out-produce the
//! sources of the open block), plus two specialized ones with provable
//! bounds: level-order chunking for element-wise graphs and work-order
//! chunking for element-wise/downsampler graphs.

use std::collections::BTreeSet;
use std::fmt;

use crate::analysis::node_levels;
use crate::error::CoreError;
use crate::graph::{topological_order, NodeIdx, TaskGraph, Volume};
use crate::rational::Q;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PartitionVariant {
    /// Greedy, strict: a candidate must not produce more data than the
    /// block sources it streams from.
    SbLts,
    /// Greedy, relaxed: falls back to the least-producing source so every
    /// block except possibly the last is full.
    SbRlx,
    /// Level-order chunks for element-wise graphs.
    ElemwiseLevel,
    /// Non-increasing work order for element-wise + downsampler graphs.
    DownsamplerWork,
}

impl fmt::Display for PartitionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PartitionVariant::SbLts => "sb-lts",
            PartitionVariant::SbRlx => "sb-rlx",
            PartitionVariant::ElemwiseLevel => "elemwise",
            PartitionVariant::DownsamplerWork => "downsampler",
        };
        write!(f, "{s}")
    }
}

/// Ordered spatial blocks. Every PE-occupying node appears in exactly one
/// block (at most `p` per block); buffers are carried in the block of their
/// earliest successor and never count toward `p`.
#[derive(Clone, Debug)]
pub struct SpatialPartition {
    /// Blocks in execution order; within a block, PE nodes appear in
    /// selection order (used for PE index assignment) and buffers follow.
    pub blocks: Vec<Vec<NodeIdx>>,
    pub variant: PartitionVariant,
    pub p: u32,
    block_of: Vec<u32>,
}

impl SpatialPartition {
    pub fn block_of(&self, v: NodeIdx) -> u32 {
        self.block_of[v.idx()]
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Node set of one block.
    pub fn block_set(&self, i: usize) -> BTreeSet<NodeIdx> {
        self.blocks[i].iter().copied().collect()
    }

    fn from_pe_blocks(
        graph: &TaskGraph,
        mut blocks: Vec<Vec<NodeIdx>>,
        variant: PartitionVariant,
        p: u32,
    ) -> Result<Self, CoreError> {
        let mut block_of = vec![u32::MAX; graph.node_count()];
        for (i, block) in blocks.iter().enumerate() {
            for v in block {
                block_of[v.idx()] = i as u32;
            }
        }
        // Buffers join the block of their earliest successor. Resolve in
        // reverse topological order so buffer-to-buffer chains settle.
        let order = topological_order(graph)?;
        for v in order.into_iter().rev() {
            if !graph.is_buffer(v) {
                continue;
            }
            let earliest = graph
                .succs(v)
                .map(|s| block_of[s.idx()])
                .min()
                .ok_or_else(|| {
                    CoreError::Invariant(format!("buffer `{}` has no successor", graph.name(v)))
                })?;
            block_of[v.idx()] = earliest;
            blocks[earliest as usize].push(v);
        }
        Ok(SpatialPartition {
            blocks,
            variant,
            p,
            block_of,
        })
    }
}

/// Greedy spatial-block partitioning.
///
/// Maintains the residual graph over PE-occupying nodes (buffer hops are
/// transparent dependencies). Candidates are the residual sources. A
/// candidate is admissible when it streams from no node of the open block,
/// or when its output volume does not exceed the largest output volume among
/// the block sources it reaches through in-block streaming paths. The strict
/// variant closes the block when no candidate is admissible; the relaxed one
/// falls back to the least-producing source. Ties break by node level, then
/// by node id.
pub fn partition_greedy(
    graph: &TaskGraph,
    p: u32,
    variant: PartitionVariant,
) -> Result<SpatialPartition, CoreError> {
    if p == 0 {
        return Err(CoreError::InvalidP);
    }
    if !matches!(variant, PartitionVariant::SbLts | PartitionVariant::SbRlx) {
        return Err(CoreError::Precondition(
            "partition_greedy takes the sb-lts or sb-rlx variant".into(),
        ));
    }
    graph.ensure_valid()?;
    let level = node_levels(graph)?;

    // PE-node dependency graph with buffers contracted away.
    let pe_preds = transparent_pe_preds(graph)?;
    let mut pe_succs: Vec<Vec<NodeIdx>> = vec![Vec::new(); graph.node_count()];
    let mut indeg = vec![0usize; graph.node_count()];
    for v in graph.node_indices() {
        if graph.is_buffer(v) {
            continue;
        }
        for &u in &pe_preds[v.idx()] {
            pe_succs[u.idx()].push(v);
            indeg[v.idx()] += 1;
        }
    }

    let mut unassigned: usize = graph.node_indices().filter(|v| !graph.is_buffer(*v)).count();
    let mut is_source: Vec<bool> = graph
        .node_indices()
        .map(|v| !graph.is_buffer(v) && indeg[v.idx()] == 0)
        .collect();
    let mut assigned = vec![false; graph.node_count()];

    let mut blocks: Vec<Vec<NodeIdx>> = Vec::new();
    let mut block: Vec<NodeIdx> = Vec::new();
    // Block sources of the open block and, per admitted member, the set of
    // block sources that reach it through in-block streaming edges.
    let mut block_sources: Vec<NodeIdx> = Vec::new();
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); graph.node_count()];
    let mut in_open_block = vec![false; graph.node_count()];

    let key = |v: NodeIdx| (level[v.idx()], graph.lex_rank(v));

    while unassigned > 0 {
        // In-block streaming predecessors of a candidate: direct non-buffer
        // edges from members of the open block.
        let reaching_sources = |c: NodeIdx| -> BTreeSet<usize> {
            let mut set = BTreeSet::new();
            for u in graph.preds(c) {
                if graph.is_buffer(u) || !in_open_block[u.idx()] {
                    continue;
                }
                set.extend(reach[u.idx()].iter().copied());
                if let Some(pos) = block_sources.iter().position(|s| *s == u) {
                    set.insert(pos);
                }
            }
            set
        };

        let mut best: Option<(Q, u32, NodeIdx)> = None;
        let mut best_fallback: Option<(Volume, Q, u32, NodeIdx)> = None;
        for v in graph.node_indices() {
            if !is_source[v.idx()] || assigned[v.idx()] {
                continue;
            }
            let sources = reaching_sources(v);
            let admissible = sources.is_empty()
                || graph.k_out(v)
                    <= sources
                        .iter()
                        .map(|s| graph.k_out(block_sources[*s]))
                        .max()
                        .unwrap_or(0);
            let (lv, rk) = key(v);
            if admissible
                && best.is_none_or(|(bl, br, _)| (lv, rk) < (bl, br)) {
                    best = Some((lv, rk, v));
                }
            if variant == PartitionVariant::SbRlx
                && best_fallback.is_none_or(|(bk, bl, br, _)| {
                    (graph.k_out(v), lv, rk) < (bk, bl, br)
                })
            {
                best_fallback = Some((graph.k_out(v), lv, rk, v));
            }
        }

        let cand = best
            .map(|(_, _, v)| v)
            .or_else(|| best_fallback.map(|(_, _, _, v)| v));

        if let Some(c) = cand {
            let sources = reaching_sources(c);
            if sources.is_empty() {
                block_sources.push(c);
                reach[c.idx()] = BTreeSet::new();
            } else {
                reach[c.idx()] = sources;
            }
            block.push(c);
            in_open_block[c.idx()] = true;
            assigned[c.idx()] = true;
            is_source[c.idx()] = false;
            unassigned -= 1;
            for &s in &pe_succs[c.idx()] {
                indeg[s.idx()] -= 1;
                if indeg[s.idx()] == 0 && !assigned[s.idx()] {
                    is_source[s.idx()] = true;
                }
            }
        }

        if block.len() >= p as usize || cand.is_none() {
            for v in &block {
                in_open_block[v.idx()] = false;
                reach[v.idx()].clear();
            }
            block_sources.clear();
            if !block.is_empty() {
                blocks.push(std::mem::take(&mut block));
            } else if cand.is_none() {
                return Err(CoreError::Invariant(
                    "no candidate available for a fresh block".into(),
                ));
            }
        }
    }
    if !block.is_empty() {
        blocks.push(block);
    }
    SpatialPartition::from_pe_blocks(graph, blocks, variant, p)
}

/// Level-order partitioning for element-wise graphs: sort PE tasks by level
/// (ties by id) and cut into consecutive blocks of `p`.
pub fn partition_elementwise(graph: &TaskGraph, p: u32) -> Result<SpatialPartition, CoreError> {
    if p == 0 {
        return Err(CoreError::InvalidP);
    }
    graph.ensure_valid()?;
    for v in graph.node_indices() {
        match graph.kind(v) {
            crate::graph::NodeKind::Compute(r) if !r.is_elementwise() => {
                return Err(CoreError::NotElementwise(graph.name(v).to_string()))
            }
            crate::graph::NodeKind::Buffer(_) => {
                return Err(CoreError::Precondition(format!(
                    "buffer `{}` not supported by the level-order partitioner",
                    graph.name(v)
                )))
            }
            _ => {}
        }
    }
    let level = node_levels(graph)?;
    let mut tasks: Vec<NodeIdx> = graph.node_indices().collect();
    tasks.sort_by_key(|v| (level[v.idx()], graph.lex_rank(*v)));
    let blocks = tasks
        .chunks(p as usize)
        .map(|c| c.to_vec())
        .collect::<Vec<_>>();
    SpatialPartition::from_pe_blocks(graph, blocks, PartitionVariant::ElemwiseLevel, p)
}

/// Work-order partitioning for element-wise/downsampler graphs: repeatedly
/// pick the residual source with the highest work (ties by lower level, then
/// id) and cut the selection order into blocks of `p`. Work never increases
/// along a path in such graphs, so selections come out in non-increasing
/// work order.
pub fn partition_downsampler(graph: &TaskGraph, p: u32) -> Result<SpatialPartition, CoreError> {
    if p == 0 {
        return Err(CoreError::InvalidP);
    }
    graph.ensure_valid()?;
    for v in graph.node_indices() {
        match graph.kind(v) {
            crate::graph::NodeKind::Compute(r) if r.is_upsampler() => {
                return Err(CoreError::UpsamplerPresent(graph.name(v).to_string()))
            }
            crate::graph::NodeKind::Buffer(_) => {
                return Err(CoreError::Precondition(format!(
                    "buffer `{}` not supported by the work-order partitioner",
                    graph.name(v)
                )))
            }
            _ => {}
        }
    }
    let level = node_levels(graph)?;
    let w = crate::analysis::work(graph)?.per_node;

    let mut indeg: Vec<usize> = graph
        .node_indices()
        .map(|v| graph.in_edges(v).len())
        .collect();
    let mut ready: BTreeSet<(std::cmp::Reverse<Volume>, Q, u32, NodeIdx)> = BTreeSet::new();
    for v in graph.node_indices() {
        if indeg[v.idx()] == 0 {
            ready.insert((std::cmp::Reverse(w[v.idx()]), level[v.idx()], graph.lex_rank(v), v));
        }
    }
    let mut selection = Vec::with_capacity(graph.node_count());
    while let Some(entry) = ready.iter().next().copied() {
        ready.remove(&entry);
        let v = entry.3;
        selection.push(v);
        for s in graph.succs(v) {
            indeg[s.idx()] -= 1;
            if indeg[s.idx()] == 0 {
                ready.insert((std::cmp::Reverse(w[s.idx()]), level[s.idx()], graph.lex_rank(s), s));
            }
        }
    }
    let blocks = selection
        .chunks(p as usize)
        .map(|c| c.to_vec())
        .collect::<Vec<_>>();
    SpatialPartition::from_pe_blocks(graph, blocks, PartitionVariant::DownsamplerWork, p)
}

/// PE-node predecessors with buffer chains contracted: `u` is a predecessor
/// of `v` when an edge or a buffer-only path leads from `u` to `v`.
fn transparent_pe_preds(graph: &TaskGraph) -> Result<Vec<Vec<NodeIdx>>, CoreError> {
    let order = topological_order(graph)?;
    let mut preds: Vec<BTreeSet<NodeIdx>> = vec![BTreeSet::new(); graph.node_count()];
    for v in order {
        let mut set = BTreeSet::new();
        for u in graph.preds(v) {
            if graph.is_buffer(u) {
                set.extend(preds[u.idx()].iter().copied());
            } else {
                set.insert(u);
            }
        }
        preds[v.idx()] = set;
    }
    Ok(preds.into_iter().map(|s| s.into_iter().collect()).collect())
}

/// Checks the structural invariants of a partition against its graph; used
/// by tests and by the scheduler's input validation.
pub fn check_partition(graph: &TaskGraph, part: &SpatialPartition) -> Result<(), CoreError> {
    let mut seen = vec![false; graph.node_count()];
    for (i, block) in part.blocks.iter().enumerate() {
        let pe_count = block.iter().filter(|v| !graph.is_buffer(**v)).count();
        if pe_count > part.p as usize {
            return Err(CoreError::Mismatch(format!(
                "block {i} holds {pe_count} PE tasks with p = {}",
                part.p
            )));
        }
        for v in block {
            if seen[v.idx()] {
                return Err(CoreError::Mismatch(format!(
                    "node `{}` appears in more than one block",
                    graph.name(*v)
                )));
            }
            seen[v.idx()] = true;
            if part.block_of(*v) != i as u32 {
                return Err(CoreError::Mismatch("block index map out of sync".into()));
            }
        }
    }
    if let Some(v) = graph.node_indices().find(|v| !seen[v.idx()]) {
        return Err(CoreError::Mismatch(format!(
            "node `{}` is not assigned to any block",
            graph.name(v)
        )));
    }
    for e in graph.edges() {
        if part.block_of(e.src) > part.block_of(e.dst) {
            return Err(CoreError::Mismatch(format!(
                "edge `{}` -> `{}` goes backwards across blocks",
                graph.name(e.src),
                graph.name(e.dst)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TaskGraph;

    fn ew_chain(n: usize, k: u64) -> TaskGraph {
        let mut b = TaskGraph::builder().source("t00");
        for i in 1..n - 1 {
            b = b.compute(format!("t{i:02}"), 1, 1);
        }
        b = b.sink(format!("t{:02}", n - 1));
        for i in 0..n - 1 {
            b = b.edge(format!("t{i:02}"), format!("t{:02}", i + 1), k);
        }
        b.build().unwrap()
    }

    fn names(graph: &TaskGraph, part: &SpatialPartition) -> Vec<Vec<String>> {
        part.blocks
            .iter()
            .map(|b| b.iter().map(|v| graph.name(*v).to_string()).collect())
            .collect()
    }

    #[test]
    fn chain_splits_in_order() {
        let g = ew_chain(8, 16);
        for variant in [PartitionVariant::SbLts, PartitionVariant::SbRlx] {
            let part = partition_greedy(&g, 4, variant).unwrap();
            assert_eq!(
                names(&g, &part),
                vec![
                    vec!["t00", "t01", "t02", "t03"],
                    vec!["t04", "t05", "t06", "t07"]
                ]
            );
            check_partition(&g, &part).unwrap();
        }
    }

    #[test]
    fn strict_rejects_overproducing_upsampler() {
        // src produces 4, the upsampler would produce 16: strict splits,
        // relaxed packs.
        let g = TaskGraph::builder()
            .source("src")
            .compute("ups", 4, 1)
            .sink("z")
            .edge("src", "ups", 4)
            .edge("ups", "z", 16)
            .build()
            .unwrap();
        let strict = partition_greedy(&g, 2, PartitionVariant::SbLts).unwrap();
        assert_eq!(names(&g, &strict), vec![vec!["src"], vec!["ups", "z"]]);
        let relaxed = partition_greedy(&g, 2, PartitionVariant::SbRlx).unwrap();
        assert_eq!(names(&g, &relaxed), vec![vec!["src", "ups"], vec!["z"]]);
    }

    #[test]
    fn relaxed_fills_single_block_when_tasks_fit() {
        let g = ew_chain(5, 8);
        let part = partition_greedy(&g, 8, PartitionVariant::SbRlx).unwrap();
        assert_eq!(part.block_count(), 1);
    }

    #[test]
    fn elementwise_level_chunks() {
        let g = ew_chain(6, 8);
        let part = partition_elementwise(&g, 2).unwrap();
        assert_eq!(
            names(&g, &part),
            vec![vec!["t00", "t01"], vec!["t02", "t03"], vec!["t04", "t05"]]
        );
    }

    #[test]
    fn complete_bipartite_levels_become_blocks() {
        let mut b = TaskGraph::builder();
        for i in 0..4 {
            b = b.source(format!("a{i}"));
        }
        for i in 0..4 {
            b = b.sink(format!("b{i}"));
        }
        for i in 0..4 {
            for j in 0..4 {
                b = b.edge(format!("a{i}"), format!("b{j}"), 8);
            }
        }
        let g = b.build().unwrap();
        let part = partition_elementwise(&g, 4).unwrap();
        assert_eq!(
            names(&g, &part),
            vec![vec!["a0", "a1", "a2", "a3"], vec!["b0", "b1", "b2", "b3"]]
        );
    }

    #[test]
    fn elementwise_rejects_downsampler() {
        let g = TaskGraph::builder()
            .source("a")
            .compute("d", 1, 2)
            .sink("z")
            .edge("a", "d", 8)
            .edge("d", "z", 4)
            .build()
            .unwrap();
        assert!(matches!(
            partition_elementwise(&g, 2),
            Err(CoreError::NotElementwise(_))
        ));
    }

    #[test]
    fn downsampler_chain_follows_order() {
        let g = TaskGraph::builder()
            .source("a")
            .compute("d1", 1, 4)
            .compute("d2", 1, 4)
            .sink("z")
            .edge("a", "d1", 32)
            .edge("d1", "d2", 8)
            .edge("d2", "z", 2)
            .build()
            .unwrap();
        let part = partition_downsampler(&g, 2).unwrap();
        assert_eq!(names(&g, &part), vec![vec!["a", "d1"], vec!["d2", "z"]]);
    }

    #[test]
    fn downsampler_selection_non_increasing_work() {
        let g = TaskGraph::builder()
            .source("a")
            .compute("b", 1, 2)
            .compute("c", 1, 4)
            .compute("d", 1, 1)
            .sink("z1")
            .sink("z2")
            .edge("a", "b", 16)
            .edge("a", "c", 16)
            .edge("b", "d", 8)
            .edge("d", "z1", 8)
            .edge("c", "z2", 4)
            .build()
            .unwrap();
        let part = partition_downsampler(&g, 3).unwrap();
        let w = crate::analysis::work(&g).unwrap().per_node;
        let selected: Vec<u64> = part
            .blocks
            .iter()
            .flatten()
            .map(|v| w[v.idx()])
            .collect();
        for pair in selected.windows(2) {
            assert!(pair[0] >= pair[1], "work order violated: {selected:?}");
        }
    }

    #[test]
    fn downsampler_rejects_upsampler() {
        let g = TaskGraph::builder()
            .source("a")
            .compute("u", 2, 1)
            .sink("z")
            .edge("a", "u", 8)
            .edge("u", "z", 16)
            .build()
            .unwrap();
        assert!(matches!(
            partition_downsampler(&g, 2),
            Err(CoreError::UpsamplerPresent(_))
        ));
    }

    #[test]
    fn buffers_join_block_of_earliest_successor() {
        let g = TaskGraph::builder()
            .source("a")
            .buffer("m", 1, 1)
            .compute("b", 1, 1)
            .sink("z")
            .edge("a", "m", 4)
            .edge("m", "b", 4)
            .edge("b", "z", 4)
            .build()
            .unwrap();
        let part = partition_greedy(&g, 2, PartitionVariant::SbRlx).unwrap();
        let m = g.find("m").unwrap();
        let b = g.find("b").unwrap();
        assert_eq!(part.block_of(m), part.block_of(b));
        check_partition(&g, &part).unwrap();
    }

    #[test]
    fn determinism() {
        let g = ew_chain(7, 8);
        let a = partition_greedy(&g, 3, PartitionVariant::SbRlx).unwrap();
        let b = partition_greedy(&g, 3, PartitionVariant::SbRlx).unwrap();
        assert_eq!(a.blocks, b.blocks);
    }

    #[test]
    fn zero_p_rejected() {
        let g = ew_chain(3, 4);
        assert!(matches!(
            partition_greedy(&g, 0, PartitionVariant::SbLts),
            Err(CoreError::InvalidP)
        ));
    }
}
