//! Element-granularity discrete-event simulation.
//!
//! Executes a partitioned, buffered graph on a unit-step clock and reports
//! the achieved makespan, which validates the analytical schedule. All
//! delays are one time unit, so a global step counter is equivalent to an
//! event queue.
//!
//! Each step has an emit phase followed by a read phase, giving element-wise
//! nodes one cycle of latency at unit throughput. A compute node with rate
//! `R = p/q` (lowest terms) tracks consumed (`n_c`) and produced (`n_p`)
//! counts: it emits one element to every output when
//! `floor(n_c * p / q) >= n_p + 1` and all outputs have space, and reads one
//! element from every input when all are non-empty and
//! `n_p >= floor(n_c * p / q)`. Sources emit one element per step while an
//! output slot is free; sinks read one per step and retire it to memory one
//! step later. Buffer nodes absorb everything, then emit one element per
//! step per output edge.
//!
//! Streaming edges are FIFOs with the planned capacities and
//! blocking-after-service writes. Cross-block and buffer-adjacent edges are
//! memory channels without backpressure. Tasks of block `i` activate only
//! once every task of block `i-1` has finished.

use std::collections::BTreeSet;

use crate::buffers::BufferPlan;
use crate::error::CoreError;
use crate::generators::{generate, GenConfig};
use crate::graph::{NodeIdx, NodeKind, TaskGraph, Volume};
use crate::partition::{check_partition, partition_greedy, PartitionVariant, SpatialPartition};
use crate::rational::{q, Q};
use crate::schedule::{schedule_streaming, Schedule};

/// Result of one simulation run.
#[derive(Clone, Debug)]
pub struct SimReport {
    pub simulated_makespan: u64,
    pub deadlocked: bool,
    /// Wait-for cycle among blocked tasks, present when deadlocked.
    pub blocked_cycle: Option<Vec<NodeIdx>>,
    /// Per node: step of the first and last emitted element (sinks count
    /// the store of an element to memory as its emission).
    pub emissions: Vec<Option<(u64, u64)>>,
    /// `(simulated - scheduled) / scheduled`; `None` when deadlocked.
    pub relative_error: Option<Q>,
}

struct EdgeState {
    occupancy: u64,
    produced: u64,
    capacity: Option<Volume>,
}

/// Runs the schedule through the simulator.
pub fn simulate(
    graph: &TaskGraph,
    partition: &SpatialPartition,
    schedule: &Schedule,
    plan: &BufferPlan,
) -> Result<SimReport, CoreError> {
    check_partition(graph, partition)?;
    if plan.capacity.len() != graph.edge_count() {
        return Err(CoreError::Mismatch("plan does not cover the graph".into()));
    }
    if schedule.tasks.len() != graph.node_count() {
        return Err(CoreError::Mismatch("schedule does not cover the graph".into()));
    }

    let n = graph.node_count();
    let mut edges: Vec<EdgeState> = graph
        .edge_indices()
        .map(|e| EdgeState {
            occupancy: 0,
            produced: 0,
            capacity: plan.get(e),
        })
        .collect();

    let mut nc = vec![0u64; n];
    let mut np = vec![0u64; n];
    let mut first = vec![None::<u64>; n];
    let mut last = vec![None::<u64>; n];
    let mut finished = vec![false; n];
    // Buffers: step at which the whole input was received, and elements
    // pushed per output edge so far.
    let mut buffer_full_at = vec![None::<u64>; n];
    let mut buffer_pushed = vec![0u64; n];

    // Rates in lowest terms; sinks behave like unit-rate stores.
    let rate: Vec<(u64, u64)> = graph
        .node_indices()
        .map(|v| match graph.kind(v) {
            NodeKind::Compute(r) => (r.num(), r.den()),
            _ => (1, 1),
        })
        .collect();
    let entitled = |v: usize, nc_v: u64| -> u64 {
        let (p, qd) = rate[v];
        ((nc_v as u128 * p as u128) / qd as u128) as u64
    };

    let pe_done = |graph: &TaskGraph, finished: &[bool], block: &[NodeIdx]| {
        block
            .iter()
            .all(|v| graph.is_buffer(*v) || finished[v.idx()])
    };

    let mut active_block = 0usize;
    let mut t: u64 = 0;
    let blocks = &partition.blocks;

    let all_pe_finished = |finished: &[bool]| {
        graph
            .node_indices()
            .all(|v| graph.is_buffer(v) || finished[v.idx()])
    };

    loop {
        if all_pe_finished(&finished) {
            break;
        }
        t += 1;
        let mut progress = false;

        // Emit phase. Space is judged against the state left by the previous
        // step, so emission order within the phase does not matter.
        let is_active = |active_block: usize, v: NodeIdx| {
            (partition.block_of(v) as usize) <= active_block
        };
        let mut emitted: Vec<NodeIdx> = Vec::new();
        for v in graph.node_indices() {
            if graph.is_buffer(v) || finished[v.idx()] || !is_active(active_block, v) {
                continue;
            }
            let i = v.idx();
            let can = match graph.kind(v) {
                NodeKind::Source => np[i] < graph.k_out(v),
                NodeKind::Sink => np[i] < nc[i],
                NodeKind::Compute(_) => {
                    np[i] < graph.k_out(v) && entitled(i, nc[i]) > np[i]
                }
                NodeKind::Buffer(_) => unreachable!(),
            };
            // Blocking after service: the element that finds the channel
            // full has already been produced and waits in the producer's
            // output stage, so a capacity-B edge admits B + 1 in flight.
            let has_space = graph.out_edges(v).iter().all(|e| {
                let s = &edges[e.idx()];
                s.capacity.is_none_or(|c| s.occupancy <= c)
            });
            if can && has_space {
                emitted.push(v);
            }
        }
        for v in emitted {
            let i = v.idx();
            np[i] += 1;
            first[i].get_or_insert(t);
            last[i] = Some(t);
            for e in graph.out_edges(v) {
                edges[e.idx()].occupancy += 1;
                edges[e.idx()].produced += 1;
            }
            match graph.kind(v) {
                NodeKind::Source if np[i] == graph.k_out(v) => finished[i] = true,
                NodeKind::Sink if np[i] == graph.k_in(v) => finished[i] = true,
                NodeKind::Compute(_)
                    if np[i] == graph.k_out(v) && nc[i] == graph.k_in(v) =>
                {
                    finished[i] = true
                }
                _ => {}
            }
            progress = true;
        }

        // Buffer heads push one element per output edge per step once full.
        for v in graph.node_indices() {
            if !graph.is_buffer(v) {
                continue;
            }
            let i = v.idx();
            if let Some(full) = buffer_full_at[i] {
                if t > full && buffer_pushed[i] < graph.k_out(v) {
                    buffer_pushed[i] += 1;
                    first[i].get_or_insert(t);
                    last[i] = Some(t);
                    for e in graph.out_edges(v) {
                        edges[e.idx()].occupancy += 1;
                        edges[e.idx()].produced += 1;
                    }
                    progress = true;
                }
            }
        }
        // Buffers become full the step their last input element arrives.
        for v in graph.node_indices() {
            if !graph.is_buffer(v) || buffer_full_at[v.idx()].is_some() {
                continue;
            }
            let full = graph
                .in_edges(v)
                .iter()
                .all(|e| edges[e.idx()].produced == graph.edge(*e).volume);
            if full {
                buffer_full_at[v.idx()] = Some(t);
                progress = true;
            }
        }

        // A block opens the moment the previous one completes, so its tasks
        // may read within the same step (after the closing emission).
        while active_block < blocks.len() && pe_done(graph, &finished, &blocks[active_block]) {
            active_block += 1;
        }

        // Read phase.
        for v in graph.node_indices() {
            if graph.is_buffer(v) || finished[v.idx()] || !is_active(active_block, v) {
                continue;
            }
            let i = v.idx();
            let wants = match graph.kind(v) {
                NodeKind::Source => false,
                NodeKind::Sink => nc[i] < graph.k_in(v),
                NodeKind::Compute(_) => nc[i] < graph.k_in(v) && np[i] >= entitled(i, nc[i]),
                NodeKind::Buffer(_) => unreachable!(),
            };
            if !wants {
                continue;
            }
            let all_ready = graph
                .in_edges(v)
                .iter()
                .all(|e| edges[e.idx()].occupancy > 0);
            if !all_ready {
                continue;
            }
            for e in graph.in_edges(v) {
                edges[e.idx()].occupancy -= 1;
            }
            nc[i] += 1;
            if let NodeKind::Compute(_) = graph.kind(v) {
                if np[i] == graph.k_out(v) && nc[i] == graph.k_in(v) {
                    finished[i] = true;
                }
            }
            progress = true;
        }

        if !progress {
            let cycle = blocked_cycle(graph, partition, active_block, &nc, &np, &edges, &finished, &rate);
            return Ok(SimReport {
                simulated_makespan: t - 1,
                deadlocked: true,
                blocked_cycle: Some(cycle),
                emissions: collect_emissions(&first, &last),
                relative_error: None,
            });
        }
    }

    // Conservation: every node consumed and produced its full volumes.
    for v in graph.node_indices() {
        let i = v.idx();
        let ok = match graph.kind(v) {
            NodeKind::Source => np[i] == graph.k_out(v),
            NodeKind::Sink => nc[i] == graph.k_in(v) && np[i] == graph.k_in(v),
            NodeKind::Compute(_) => nc[i] == graph.k_in(v) && np[i] == graph.k_out(v),
            NodeKind::Buffer(_) => buffer_pushed[i] == graph.k_out(v),
        };
        if !ok {
            return Err(CoreError::Invariant(format!(
                "conservation failed at `{}`",
                graph.name(v)
            )));
        }
    }

    let simulated_makespan = last.iter().flatten().copied().max().unwrap_or(0);
    let relative_error = if schedule.makespan == 0 {
        None
    } else {
        Some(
            (q(simulated_makespan) - q(schedule.makespan)) / q(schedule.makespan),
        )
    };
    Ok(SimReport {
        simulated_makespan,
        deadlocked: false,
        blocked_cycle: None,
        emissions: collect_emissions(&first, &last),
        relative_error,
    })
}

fn collect_emissions(first: &[Option<u64>], last: &[Option<u64>]) -> Vec<Option<(u64, u64)>> {
    first
        .iter()
        .zip(last)
        .map(|(f, l)| f.zip(*l))
        .collect()
}

/// Wait-for cycle among stalled tasks: a blocked reader waits on the
/// producer of an empty input, a blocked writer on the consumer of a full
/// output. Falls back to the set of blocked tasks if no cycle closes.
#[allow(clippy::too_many_arguments)]
fn blocked_cycle(
    graph: &TaskGraph,
    partition: &SpatialPartition,
    active_block: usize,
    nc: &[u64],
    np: &[u64],
    edges: &[EdgeState],
    finished: &[bool],
    rate: &[(u64, u64)],
) -> Vec<NodeIdx> {
    let entitled = |v: usize| ((nc[v] as u128 * rate[v].0 as u128) / rate[v].1 as u128) as u64;
    let mut waits: Vec<(NodeIdx, NodeIdx)> = Vec::new();
    let mut blocked: BTreeSet<NodeIdx> = BTreeSet::new();
    for v in graph.node_indices() {
        if graph.is_buffer(v) || finished[v.idx()] {
            continue;
        }
        if (partition.block_of(v) as usize) > active_block {
            continue;
        }
        let i = v.idx();
        blocked.insert(v);
        let needs_input = match graph.kind(v) {
            NodeKind::Source => false,
            NodeKind::Sink => nc[i] < graph.k_in(v),
            _ => nc[i] < graph.k_in(v) && np[i] >= entitled(i),
        };
        if needs_input {
            for e in graph.in_edges(v) {
                if edges[e.idx()].occupancy == 0 {
                    waits.push((v, graph.edge(*e).src));
                }
            }
        }
        for e in graph.out_edges(v) {
            let s = &edges[e.idx()];
            if s.capacity.is_some_and(|c| s.occupancy > c) {
                waits.push((v, graph.edge(*e).dst));
            }
        }
    }
    // Find any cycle in the wait-for relation.
    for &start in &blocked {
        let mut path = vec![start];
        let mut cur = start;
        for _ in 0..graph.node_count() {
            let next = waits.iter().find(|(a, _)| *a == cur).map(|(_, b)| *b);
            match next {
                Some(nb) => {
                    if let Some(pos) = path.iter().position(|x| *x == nb) {
                        return path[pos..].to_vec();
                    }
                    path.push(nb);
                    cur = nb;
                }
                None => break,
            }
        }
    }
    blocked.into_iter().collect()
}

// ── Error sweeps ────────────────────────────────────────────────────────────

/// One generate/partition/schedule/buffer/simulate run.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub graph_seed: u64,
    pub p: u32,
    pub variant: PartitionVariant,
    pub sched_makespan: u64,
    pub sim_makespan: u64,
    pub deadlocked: bool,
    pub rel_error: Q,
}

/// Distribution summary of one `(p, variant)` cell, with quartiles and
/// whiskers at the usual 1.5 IQR fences.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub p: u32,
    pub variant: PartitionVariant,
    pub n: usize,
    pub median: Q,
    pub q1: Q,
    pub q3: Q,
    pub whisker_lo: Q,
    pub whisker_hi: Q,
    pub outliers: Vec<Q>,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

/// Runs `n_graphs` random instances of a topology through the whole pipeline
/// for every `(p, variant)` cell and aggregates the relative errors. Graph
/// `i` uses seed `seed + i`, so the same graphs appear in every cell.
pub fn error_sweep(
    base: &GenConfig,
    p_list: &[u32],
    variants: &[PartitionVariant],
    n_graphs: u32,
    seed: u64,
) -> Result<SweepSummary, CoreError> {
    let mut rows = Vec::new();
    for i in 0..n_graphs {
        let cfg = GenConfig {
            seed: seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let graph = generate(&cfg)?;
        for &p in p_list {
            for &variant in variants {
                let partition = partition_greedy(&graph, p, variant)?;
                let schedule = schedule_streaming(&graph, &partition)?;
                let plan = crate::buffers::buffer_plan(&graph, &partition, &schedule)?;
                let report = simulate(&graph, &partition, &schedule, &plan)?;
                rows.push(SweepRow {
                    graph_seed: cfg.seed,
                    p,
                    variant,
                    sched_makespan: schedule.makespan,
                    sim_makespan: report.simulated_makespan,
                    deadlocked: report.deadlocked,
                    rel_error: report.relative_error.unwrap_or_else(|| q(0)),
                });
            }
        }
    }
    let mut cells = Vec::new();
    for &p in p_list {
        for &variant in variants {
            let sample: Vec<Q> = rows
                .iter()
                .filter(|r| r.p == p && r.variant == variant && !r.deadlocked)
                .map(|r| r.rel_error)
                .collect();
            if let Some(cell) = summarize(p, variant, &sample) {
                cells.push(cell);
            }
        }
    }
    Ok(SweepSummary { rows, cells })
}

fn median_of(sorted: &[Q]) -> Q {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / q(2)
    }
}

/// Tukey-style summary: quartiles are medians of the lower/upper halves
/// (excluding the overall median for odd sizes); whiskers are the extreme
/// samples within 1.5 IQR of the quartiles.
pub fn summarize(p: u32, variant: PartitionVariant, sample: &[Q]) -> Option<SweepCell> {
    if sample.is_empty() {
        return None;
    }
    let mut sorted = sample.to_vec();
    sorted.sort();
    let n = sorted.len();
    let median = median_of(&sorted);
    let (q1, q3) = if n == 1 {
        (sorted[0], sorted[0])
    } else {
        let half = n / 2;
        (median_of(&sorted[..half]), median_of(&sorted[n - half..]))
    };
    let iqr = q3 - q1;
    let lo_fence = q1 - q(3) / q(2) * iqr;
    let hi_fence = q3 + q(3) / q(2) * iqr;
    let whisker_lo = *sorted.iter().find(|x| **x >= lo_fence).unwrap_or(&sorted[0]);
    let whisker_hi = *sorted
        .iter()
        .rev()
        .find(|x| **x <= hi_fence)
        .unwrap_or(&sorted[n - 1]);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|x| *x < whisker_lo || *x > whisker_hi)
        .collect();
    Some(SweepCell {
        p,
        variant,
        n,
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    })
}
