//! FIFO capacities for deadlock-free streaming execution.
//!
//! Within a spatial block, streaming channels are bounded FIFOs with
//! blocking-after-service writes, so an acyclic task graph can still
//! deadlock: along an undirected cycle, one path may need to absorb data
//! while a sibling path is still filling its pipeline. The fix is to give
//! the joining edges enough slack to cover the first-out time difference of
//! their producers, divided by the producer's streaming interval, capped by
//! the edge volume. Edges outside cycle regions keep a single-element
//! buffer.

use std::collections::BTreeSet;

use crate::analysis::streaming_intervals;
use crate::error::CoreError;
use crate::graph::{EdgeIdx, NodeIdx, TaskGraph, Volume};
use crate::partition::{check_partition, SpatialPartition};
use crate::rational::{ceil_u64, q};
use crate::schedule::Schedule;

/// Capacity (in elements) of every streaming edge of a partitioned graph.
#[derive(Clone, Debug)]
pub struct BufferPlan {
    /// Indexed by edge; `None` for non-streaming (cross-block or
    /// buffer-adjacent) edges.
    pub capacity: Vec<Option<Volume>>,
}

impl BufferPlan {
    pub fn get(&self, e: EdgeIdx) -> Option<Volume> {
        self.capacity[e.idx()]
    }

    /// Plan with one fixed capacity on every streaming edge. Used to study
    /// deadlocks.
    pub fn uniform(graph: &TaskGraph, partition: &SpatialPartition, cap: Volume) -> BufferPlan {
        let capacity = graph
            .edge_indices()
            .map(|e| is_streaming_edge(graph, partition, e).then_some(cap))
            .collect();
        BufferPlan { capacity }
    }

    pub fn streaming_edges(&self) -> impl Iterator<Item = (EdgeIdx, Volume)> + '_ {
        self.capacity
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|cap| (EdgeIdx(i as u32), cap)))
    }
}

/// An edge streams iff both endpoints share a block and neither is a buffer
/// node.
pub fn is_streaming_edge(graph: &TaskGraph, partition: &SpatialPartition, e: EdgeIdx) -> bool {
    let edge = graph.edge(e);
    partition.block_of(edge.src) == partition.block_of(edge.dst)
        && !graph.is_buffer(edge.src)
        && !graph.is_buffer(edge.dst)
}

/// Nodes lying on undirected cycles of one block's streaming subgraph,
/// grouped into weakly connected regions.
///
/// Undirected DFS; every non-tree edge closes a cycle against an ancestor,
/// and the tree path between its endpoints is marked. Regions are the
/// connected components of the marked nodes.
pub fn cycle_nodes(graph: &TaskGraph, block: &[NodeIdx]) -> Vec<BTreeSet<NodeIdx>> {
    let members: Vec<NodeIdx> = block
        .iter()
        .copied()
        .filter(|v| !graph.is_buffer(*v))
        .collect();
    let index_of = |v: NodeIdx| members.iter().position(|m| *m == v);
    let block_set: BTreeSet<NodeIdx> = members.iter().copied().collect();

    // Undirected adjacency with edge instance ids so parallel edges count
    // as cycles.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); members.len()];
    let mut eid = 0usize;
    for e in graph.edges() {
        if !block_set.contains(&e.src) || !block_set.contains(&e.dst) {
            continue;
        }
        if graph.is_buffer(e.src) || graph.is_buffer(e.dst) {
            continue;
        }
        let (a, b) = (index_of(e.src).unwrap(), index_of(e.dst).unwrap());
        adj[a].push((b, eid));
        adj[b].push((a, eid));
        eid += 1;
    }

    let n = members.len();
    let mut visited = vec![false; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![0usize; n];
    let mut marked = vec![false; n];

    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (u, ref mut cursor)) = stack.last_mut() {
            if *cursor >= adj[u].len() {
                stack.pop();
                continue;
            }
            let (v, e) = adj[u][*cursor];
            *cursor += 1;
            if parent_edge[u] == Some(e) {
                continue;
            }
            if !visited[v] {
                visited[v] = true;
                parent[v] = Some(u);
                parent_edge[v] = Some(e);
                depth[v] = depth[u] + 1;
                stack.push((v, 0));
            } else if depth[v] <= depth[u] {
                // Back edge: mark the tree path from u up to the ancestor v.
                let mut x = u;
                marked[v] = true;
                while x != v {
                    marked[x] = true;
                    x = parent[x].expect("ancestor path reaches the back-edge target");
                }
            }
        }
    }

    // Connected components of the marked nodes.
    let mut region = vec![usize::MAX; n];
    let mut regions: Vec<BTreeSet<NodeIdx>> = Vec::new();
    for start in 0..n {
        if !marked[start] || region[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let mut set = BTreeSet::new();
        let mut stack = vec![start];
        region[start] = id;
        while let Some(u) = stack.pop() {
            set.insert(members[u]);
            for &(v, _) in &adj[u] {
                if marked[v] && region[v] == usize::MAX {
                    region[v] = id;
                    stack.push(v);
                }
            }
        }
        regions.push(set);
    }
    regions
}

/// Sizes every streaming FIFO so the schedule executes without deadlock.
///
/// For a node `v` of a cycle region with more than one in-block streaming
/// predecessor, each incoming streaming edge `(u, v)` gets
/// `ceil((max_t fo(t) - fo(u)) / si_out(u))` elements, clamped to
/// `[1, volume]`; every other streaming edge gets one element.
pub fn buffer_plan(
    graph: &TaskGraph,
    partition: &SpatialPartition,
    schedule: &Schedule,
) -> Result<BufferPlan, CoreError> {
    check_partition(graph, partition)?;
    for v in graph.node_indices() {
        if schedule.times(v).is_none() {
            return Err(CoreError::Mismatch(format!(
                "schedule is missing node `{}`",
                graph.name(v)
            )));
        }
    }
    let mut capacity: Vec<Option<Volume>> = graph
        .edge_indices()
        .map(|e| is_streaming_edge(graph, partition, e).then_some(1))
        .collect();

    for (bi, block) in partition.blocks.iter().enumerate() {
        let regions = cycle_nodes(graph, block);
        if regions.is_empty() {
            continue;
        }
        let subset: BTreeSet<NodeIdx> = block.iter().copied().collect();
        let si = streaming_intervals(graph, Some(&subset))?;
        for region in &regions {
            for &v in region {
                let in_edges: Vec<EdgeIdx> = graph
                    .in_edges(v)
                    .iter()
                    .copied()
                    .filter(|e| {
                        let u = graph.edge(*e).src;
                        partition.block_of(u) == bi as u32 && !graph.is_buffer(u)
                    })
                    .collect();
                if in_edges.len() < 2 {
                    continue;
                }
                let fo_max = in_edges
                    .iter()
                    .map(|e| schedule.times(graph.edge(*e).src).unwrap().fo)
                    .max()
                    .unwrap();
                for e in in_edges {
                    let u = graph.edge(e).src;
                    let fo_u = schedule.times(u).unwrap().fo;
                    let si_u = si[u.idx()].expect("block member analyzed").si_out;
                    let delay = q(fo_max.saturating_sub(fo_u));
                    let raw = ceil_u64(delay / si_u);
                    let vol = graph.edge(e).volume;
                    capacity[e.idx()] = Some(raw.clamp(1, vol.max(1)));
                }
            }
        }
    }
    Ok(BufferPlan { capacity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{partition_greedy, PartitionVariant};
    use crate::schedule::schedule_streaming;

    fn diamond(k: u64) -> TaskGraph {
        TaskGraph::builder()
            .source("a")
            .compute("b", 1, 1)
            .compute("c", 1, 1)
            .sink("d")
            .edge("a", "b", k)
            .edge("a", "c", k)
            .edge("b", "d", k)
            .edge("c", "d", k)
            .build()
            .unwrap()
    }

    #[test]
    fn tree_block_has_no_cycle_region() {
        let g = TaskGraph::builder()
            .source("a")
            .compute("b", 1, 1)
            .sink("z1")
            .sink("z2")
            .edge("a", "b", 4)
            .edge("b", "z1", 4)
            .edge("b", "z2", 4)
            .build()
            .unwrap();
        let block: Vec<NodeIdx> = g.node_indices().collect();
        assert!(cycle_nodes(&g, &block).is_empty());
    }

    #[test]
    fn diamond_is_one_region() {
        let g = diamond(8);
        let block: Vec<NodeIdx> = g.node_indices().collect();
        let regions = cycle_nodes(&g, &block);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].len(), 4);
    }

    #[test]
    fn two_disjoint_diamonds_are_two_regions() {
        let mut b = TaskGraph::builder();
        for pfx in ["x", "y"] {
            b = b
                .source(format!("{pfx}a"))
                .compute(format!("{pfx}b"), 1, 1)
                .compute(format!("{pfx}c"), 1, 1)
                .sink(format!("{pfx}d"))
                .edge(format!("{pfx}a"), format!("{pfx}b"), 4)
                .edge(format!("{pfx}a"), format!("{pfx}c"), 4)
                .edge(format!("{pfx}b"), format!("{pfx}d"), 4)
                .edge(format!("{pfx}c"), format!("{pfx}d"), 4);
        }
        let g = b.build().unwrap();
        let block: Vec<NodeIdx> = g.node_indices().collect();
        let regions = cycle_nodes(&g, &block);
        assert_eq!(regions.len(), 2);
        for r in &regions {
            assert_eq!(r.len(), 4);
        }
    }

    #[test]
    fn symmetric_diamond_clamps_to_one() {
        let g = diamond(8);
        let part = partition_greedy(&g, 4, PartitionVariant::SbRlx).unwrap();
        let sched = schedule_streaming(&g, &part).unwrap();
        let plan = buffer_plan(&g, &part, &sched).unwrap();
        let d = g.find("d").unwrap();
        for e in g.in_edges(d) {
            assert_eq!(plan.get(*e), Some(1));
        }
    }

    #[test]
    fn fork_join_slow_path_gets_slack() {
        // Producer first-out times differ by 18 and the direct edge streams
        // at interval 1, so it needs 18 elements of slack.
        let g = TaskGraph::builder()
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
        let part = partition_greedy(&g, 8, PartitionVariant::SbRlx).unwrap();
        let sched = schedule_streaming(&g, &part).unwrap();
        let plan = buffer_plan(&g, &part, &sched).unwrap();
        let direct = g
            .edge_indices()
            .find(|e| {
                g.name(g.edge(*e).src) == "n0" && g.name(g.edge(*e).dst) == "n4"
            })
            .unwrap();
        assert_eq!(plan.get(direct), Some(18));
        let slow = g
            .edge_indices()
            .find(|e| {
                g.name(g.edge(*e).src) == "n3" && g.name(g.edge(*e).dst) == "n4"
            })
            .unwrap();
        assert_eq!(plan.get(slow), Some(1));
    }

    #[test]
    fn cross_block_edges_carry_no_capacity() {
        let g = diamond(8);
        let part = partition_greedy(&g, 2, PartitionVariant::SbRlx).unwrap();
        let sched = schedule_streaming(&g, &part).unwrap();
        let plan = buffer_plan(&g, &part, &sched).unwrap();
        for e in g.edge_indices() {
            let edge = g.edge(e);
            if part.block_of(edge.src) != part.block_of(edge.dst) {
                assert_eq!(plan.get(e), None);
            }
        }
    }
}
