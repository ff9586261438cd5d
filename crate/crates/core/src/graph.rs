//! Canonical task graphs.
//!
//! A canonical node receives the same number of elements from every input
//! edge and produces the same number to every output edge. Compute and
//! buffer nodes carry a production rate `R` with `k_out = R * k_in`;
//! sources only produce, sinks only consume. Buffer nodes absorb their whole
//! input before emitting and never occupy a processing element, which makes
//! them barriers for pipelined (streaming) communication.
//!
//! This module owns the graph representation, canonicality validation, the
//! buffer-split transformation used by every steady-state analysis,
//! deterministic topological ordering, and the JSON interchange format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::rational::Rate;

pub type Volume = u64;

/// Index of a node within its graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeIdx(pub u32);

impl NodeIdx {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Index of an edge within its graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EdgeIdx(pub u32);

impl EdgeIdx {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    /// Streams data out of global memory; occupies a PE.
    Source,
    /// Streams data into global memory; occupies a PE.
    Sink,
    /// Active task with production rate `R`; occupies a PE.
    Compute(Rate),
    /// Passive storage with production rate `R`; does not occupy a PE.
    Buffer(Rate),
}

impl NodeKind {
    pub fn rate(&self) -> Option<Rate> {
        match self {
            NodeKind::Compute(r) | NodeKind::Buffer(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_buffer(&self) -> bool {
        matches!(self, NodeKind::Buffer(_))
    }

    /// Source, sink and compute nodes all occupy a processing element.
    pub fn occupies_pe(&self) -> bool {
        !self.is_buffer()
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Elements received per input edge (0 for sources).
    pub k_in: Volume,
    /// Elements produced per output edge (0 for sinks).
    pub k_out: Volume,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub volume: Volume,
}

/// Immutable canonical task graph. Construct with [`GraphBuilder`] or
/// [`TaskGraph::from_json`]; all analyses treat it as read-only.
#[derive(Clone, Debug)]
pub struct TaskGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    in_edges: Vec<Vec<EdgeIdx>>,
    out_edges: Vec<Vec<EdgeIdx>>,
    /// Rank of each node when names are sorted lexicographically; used for
    /// deterministic tie-breaking.
    lex_rank: Vec<u32>,
    by_name: HashMap<String, NodeIdx>,
}

impl TaskGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of nodes that occupy a processing element.
    pub fn pe_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind.occupies_pe()).count()
    }

    pub fn node_indices(&self) -> impl Iterator<Item = NodeIdx> {
        (0..self.nodes.len() as u32).map(NodeIdx)
    }

    pub fn node(&self, v: NodeIdx) -> &Node {
        &self.nodes[v.idx()]
    }

    pub fn name(&self, v: NodeIdx) -> &str {
        &self.nodes[v.idx()].name
    }

    pub fn kind(&self, v: NodeIdx) -> NodeKind {
        self.nodes[v.idx()].kind
    }

    pub fn k_in(&self, v: NodeIdx) -> Volume {
        self.nodes[v.idx()].k_in
    }

    pub fn k_out(&self, v: NodeIdx) -> Volume {
        self.nodes[v.idx()].k_out
    }

    pub fn is_buffer(&self, v: NodeIdx) -> bool {
        self.kind(v).is_buffer()
    }

    pub fn lex_rank(&self, v: NodeIdx) -> u32 {
        self.lex_rank[v.idx()]
    }

    pub fn find(&self, name: &str) -> Option<NodeIdx> {
        self.by_name.get(name).copied()
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e.idx()]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_indices(&self) -> impl Iterator<Item = EdgeIdx> {
        (0..self.edges.len() as u32).map(EdgeIdx)
    }

    pub fn in_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.in_edges[v.idx()]
    }

    pub fn out_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.out_edges[v.idx()]
    }

    pub fn preds(&self, v: NodeIdx) -> impl Iterator<Item = NodeIdx> + '_ {
        self.in_edges[v.idx()].iter().map(|e| self.edges[e.idx()].src)
    }

    pub fn succs(&self, v: NodeIdx) -> impl Iterator<Item = NodeIdx> + '_ {
        self.out_edges[v.idx()].iter().map(|e| self.edges[e.idx()].dst)
    }

    pub fn names(&self, ids: impl IntoIterator<Item = NodeIdx>) -> Vec<String> {
        ids.into_iter().map(|v| self.name(v).to_string()).collect()
    }
}

// ── Construction ────────────────────────────────────────────────────────────

#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<(String, NodeKind)>,
    edges: Vec<(String, String, Volume)>,
}

impl GraphBuilder {
    pub fn node(mut self, name: impl Into<String>, kind: NodeKind) -> Self {
        self.nodes.push((name.into(), kind));
        self
    }

    pub fn source(self, name: impl Into<String>) -> Self {
        self.node(name, NodeKind::Source)
    }

    pub fn sink(self, name: impl Into<String>) -> Self {
        self.node(name, NodeKind::Sink)
    }

    pub fn compute(self, name: impl Into<String>, num: u64, den: u64) -> Self {
        let rate = Rate::new(num, den).expect("compute rate must be positive");
        self.node(name, NodeKind::Compute(rate))
    }

    pub fn buffer(self, name: impl Into<String>, num: u64, den: u64) -> Self {
        let rate = Rate::new(num, den).expect("buffer rate must be positive");
        self.node(name, NodeKind::Buffer(rate))
    }

    pub fn edge(
        mut self,
        src: impl Into<String>,
        dst: impl Into<String>,
        volume: Volume,
    ) -> Self {
        self.edges.push((src.into(), dst.into(), volume));
        self
    }

    /// Builds the graph. Fails only on structural problems (duplicate ids,
    /// dangling edge endpoints); canonicality is checked by
    /// [`TaskGraph::validate`].
    pub fn build(self) -> Result<TaskGraph, CoreError> {
        let mut by_name = HashMap::new();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, (name, kind)) in self.nodes.into_iter().enumerate() {
            if by_name.insert(name.clone(), NodeIdx(i as u32)).is_some() {
                return Err(CoreError::DuplicateNode(name));
            }
            nodes.push(Node {
                name,
                kind,
                k_in: 0,
                k_out: 0,
            });
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (src, dst, volume) in self.edges {
            let s = *by_name
                .get(&src)
                .ok_or_else(|| CoreError::DanglingEdge(src.clone()))?;
            let d = *by_name
                .get(&dst)
                .ok_or_else(|| CoreError::DanglingEdge(dst.clone()))?;
            let e = EdgeIdx(edges.len() as u32);
            edges.push(Edge {
                src: s,
                dst: d,
                volume,
            });
            out_edges[s.idx()].push(e);
            in_edges[d.idx()].push(e);
        }
        // Derived per-node volumes; with inconsistent edges the first edge
        // wins and validation reports the inconsistency.
        for (i, node) in nodes.iter_mut().enumerate() {
            node.k_in = in_edges[i]
                .first()
                .map(|e| edges[e.idx()].volume)
                .unwrap_or(0);
            node.k_out = out_edges[i]
                .first()
                .map(|e| edges[e.idx()].volume)
                .unwrap_or(0);
        }
        let mut order: Vec<u32> = (0..nodes.len() as u32).collect();
        order.sort_by(|a, b| nodes[*a as usize].name.cmp(&nodes[*b as usize].name));
        let mut lex_rank = vec![0u32; nodes.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            lex_rank[idx as usize] = rank as u32;
        }
        Ok(TaskGraph {
            nodes,
            edges,
            in_edges,
            out_edges,
            lex_rank,
            by_name,
        })
    }
}

// ── Validation ──────────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnequalInputVolumes { node: String },
    UnequalOutputVolumes { node: String },
    ZeroVolumeEdge { src: String, dst: String },
    SourceWithInputs { node: String },
    SourceWithoutOutputs { node: String },
    SinkWithOutputs { node: String },
    SinkWithoutInputs { node: String },
    MissingInputs { node: String },
    MissingOutputs { node: String },
    NonIntegerOutput { node: String },
    RateOverflow { node: String },
    RateVolumeMismatch { node: String, expected: Volume, actual: Volume },
    Cycle { cycle: Vec<String> },
    BufferPlacement { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnequalInputVolumes { node } => {
                write!(f, "node `{node}`: unequal input volumes")
            }
            Violation::UnequalOutputVolumes { node } => {
                write!(f, "node `{node}`: unequal output volumes")
            }
            Violation::ZeroVolumeEdge { src, dst } => {
                write!(f, "edge `{src}` -> `{dst}`: zero volume")
            }
            Violation::SourceWithInputs { node } => {
                write!(f, "source `{node}` has input edges")
            }
            Violation::SourceWithoutOutputs { node } => {
                write!(f, "source `{node}` has no output edges")
            }
            Violation::SinkWithOutputs { node } => {
                write!(f, "sink `{node}` has output edges")
            }
            Violation::SinkWithoutInputs { node } => {
                write!(f, "sink `{node}` has no input edges")
            }
            Violation::MissingInputs { node } => {
                write!(f, "node `{node}` has no input edges")
            }
            Violation::MissingOutputs { node } => {
                write!(f, "node `{node}` has no output edges")
            }
            Violation::NonIntegerOutput { node } => {
                write!(f, "node `{node}`: non-integer k_out (rate * k_in)")
            }
            Violation::RateOverflow { node } => {
                write!(f, "node `{node}`: k_out overflows 64 bits")
            }
            Violation::RateVolumeMismatch {
                node,
                expected,
                actual,
            } => write!(
                f,
                "node `{node}`: k_out {actual} does not equal rate * k_in = {expected}"
            ),
            Violation::Cycle { cycle } => {
                write!(f, "directed cycle: {}", cycle.join(" -> "))
            }
            Violation::BufferPlacement { detail } => {
                write!(f, "buffer placement: {detail}")
            }
        }
    }
}

/// Outcome of [`TaskGraph::validate`]: empty iff every invariant holds.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")
        } else {
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

impl TaskGraph {
    /// Checks every canonicality invariant and reports all violations:
    /// equal per-node input/output volumes, kind-specific degree rules,
    /// exact `k_out = R * k_in`, acyclicity, and buffer placement (no cycle
    /// in the buffer-split component DAG).
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.volume == 0 {
                out.push(Violation::ZeroVolumeEdge {
                    src: self.name(e.src).to_string(),
                    dst: self.name(e.dst).to_string(),
                });
            }
        }
        for v in self.node_indices() {
            let node = self.node(v);
            let name = || node.name.clone();
            let ins = &self.in_edges[v.idx()];
            let outs = &self.out_edges[v.idx()];
            if !ins.is_empty()
                && ins
                    .iter()
                    .any(|e| self.edges[e.idx()].volume != node.k_in)
            {
                out.push(Violation::UnequalInputVolumes { node: name() });
            }
            if !outs.is_empty()
                && outs
                    .iter()
                    .any(|e| self.edges[e.idx()].volume != node.k_out)
            {
                out.push(Violation::UnequalOutputVolumes { node: name() });
            }
            match node.kind {
                NodeKind::Source => {
                    if !ins.is_empty() {
                        out.push(Violation::SourceWithInputs { node: name() });
                    }
                    if outs.is_empty() {
                        out.push(Violation::SourceWithoutOutputs { node: name() });
                    }
                }
                NodeKind::Sink => {
                    if !outs.is_empty() {
                        out.push(Violation::SinkWithOutputs { node: name() });
                    }
                    if ins.is_empty() {
                        out.push(Violation::SinkWithoutInputs { node: name() });
                    }
                }
                NodeKind::Compute(rate) | NodeKind::Buffer(rate) => {
                    if ins.is_empty() {
                        out.push(Violation::MissingInputs { node: name() });
                    }
                    if outs.is_empty() {
                        out.push(Violation::MissingOutputs { node: name() });
                    }
                    if !ins.is_empty() && !outs.is_empty() {
                        let prod = node.k_in as u128 * rate.num() as u128;
                        if !prod.is_multiple_of(rate.den() as u128) {
                            out.push(Violation::NonIntegerOutput { node: name() });
                        } else {
                            match u64::try_from(prod / rate.den() as u128) {
                                Err(_) => {
                                    out.push(Violation::RateOverflow { node: name() })
                                }
                                Ok(expected) if expected != node.k_out => {
                                    out.push(Violation::RateVolumeMismatch {
                                        node: name(),
                                        expected,
                                        actual: node.k_out,
                                    })
                                }
                                Ok(_) => {}
                            }
                        }
                    }
                }
            }
        }
        match topological_order(self) {
            Err(CoreError::Cycle { cycle }) => out.push(Violation::Cycle { cycle }),
            Err(_) => unreachable!("topological_order only fails on cycles"),
            Ok(_) => {
                // Buffer placement is only meaningful on acyclic graphs.
                let split = SplitView::new(self, None);
                if let Some(detail) = split.component_cycle(self) {
                    out.push(Violation::BufferPlacement { detail });
                }
            }
        }
        ValidationReport { violations: out }
    }

    /// Validates and converts violations into an error.
    pub fn ensure_valid(&self) -> Result<(), CoreError> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(CoreError::Invalid(report))
        }
    }
}

// ── Topological order ───────────────────────────────────────────────────────

/// Deterministic topological order (Kahn, ties broken by node name). Fails
/// with one witness cycle if the graph is cyclic.
pub fn topological_order(graph: &TaskGraph) -> Result<Vec<NodeIdx>, CoreError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = graph.node_count();
    let mut indeg: Vec<usize> = (0..n)
        .map(|i| graph.in_edges[i].len())
        .collect();
    let mut heap: BinaryHeap<Reverse<(u32, u32)>> = BinaryHeap::new();
    for v in graph.node_indices() {
        if indeg[v.idx()] == 0 {
            heap.push(Reverse((graph.lex_rank(v), v.0)));
        }
    }
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, raw))) = heap.pop() {
        let v = NodeIdx(raw);
        order.push(v);
        for e in graph.out_edges(v) {
            let d = graph.edge(*e).dst;
            indeg[d.idx()] -= 1;
            if indeg[d.idx()] == 0 {
                heap.push(Reverse((graph.lex_rank(d), d.0)));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Walk predecessors among the remaining nodes until one repeats.
    let remaining: BTreeSet<NodeIdx> = graph
        .node_indices()
        .filter(|v| indeg[v.idx()] > 0)
        .collect();
    let start = *remaining.iter().next().expect("cycle nodes must remain");
    let mut seen = Vec::new();
    let mut cur = start;
    loop {
        if let Some(pos) = seen.iter().position(|x| *x == cur) {
            let mut cycle: Vec<String> = seen[pos..]
                .iter()
                .map(|v| graph.name(*v).to_string())
                .collect();
            cycle.reverse();
            return Err(CoreError::Cycle { cycle });
        }
        seen.push(cur);
        cur = graph
            .preds(cur)
            .find(|p| remaining.contains(p))
            .expect("node on a cycle keeps an unresolved predecessor");
    }
}

// ── Buffer splitting ────────────────────────────────────────────────────────

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SplitPart {
    /// A non-buffer node, carried over unchanged.
    Whole,
    /// Buffer half that keeps the input edges (absorbs data).
    Tail,
    /// Buffer half that keeps the output edges (emits data).
    Head,
}

#[derive(Clone, Debug)]
pub struct SplitNode {
    pub origin: NodeIdx,
    pub part: SplitPart,
}

/// Graph with every buffer duplicated into a tail (keeping the input edges)
/// and a head (keeping the output edges). No path crosses a buffer, so the
/// weakly connected components are exactly the regions where streaming is
/// possible.
#[derive(Clone, Debug)]
pub struct SplitGraph {
    pub nodes: Vec<SplitNode>,
    pub edges: Vec<(usize, usize, Volume)>,
    /// Component id per split node; ids are ordered by the lexicographically
    /// smallest member name.
    pub component: Vec<usize>,
    pub component_count: usize,
}

impl SplitGraph {
    /// Component members as original node ids, per component.
    pub fn component_members(&self) -> Vec<BTreeSet<NodeIdx>> {
        let mut out = vec![BTreeSet::new(); self.component_count];
        for (i, sn) in self.nodes.iter().enumerate() {
            out[self.component[i]].insert(sn.origin);
        }
        out
    }
}

/// Duplicates every buffer node into tail and head halves. The graph must
/// validate; the node and edge counts of the result are checked by tests.
pub fn split_buffers(graph: &TaskGraph) -> Result<SplitGraph, CoreError> {
    graph.ensure_valid()?;
    Ok(SplitView::new(graph, None).into_split_graph(graph))
}

/// Internal split-graph view, optionally restricted to an induced node
/// subset (edges crossing the subset are dropped; the analyses account for
/// them separately).
pub(crate) struct SplitView {
    /// Split nodes: `(origin, part)`.
    pub nodes: Vec<(NodeIdx, SplitPart)>,
    pub edges: Vec<(usize, usize, Volume)>,
    /// For each original node: its split index (non-buffers).
    pub whole: Vec<Option<usize>>,
    /// For each original buffer: `(tail, head)` split indices.
    pub halves: Vec<Option<(usize, usize)>>,
    /// Union-find component id per split node, renumbered deterministically.
    pub component: Vec<usize>,
    pub component_count: usize,
}

impl SplitView {
    pub fn new(graph: &TaskGraph, subset: Option<&BTreeSet<NodeIdx>>) -> Self {
        let contains = |v: NodeIdx| subset.is_none_or(|s| s.contains(&v));
        let mut nodes = Vec::new();
        let mut whole = vec![None; graph.node_count()];
        let mut halves = vec![None; graph.node_count()];
        for v in graph.node_indices() {
            if !contains(v) {
                continue;
            }
            if graph.is_buffer(v) {
                let tail = nodes.len();
                nodes.push((v, SplitPart::Tail));
                let head = nodes.len();
                nodes.push((v, SplitPart::Head));
                halves[v.idx()] = Some((tail, head));
            } else {
                whole[v.idx()] = Some(nodes.len());
                nodes.push((v, SplitPart::Whole));
            }
        }
        let mut edges = Vec::new();
        for e in graph.edges() {
            if !contains(e.src) || !contains(e.dst) {
                continue;
            }
            let s = whole[e.src.idx()].unwrap_or_else(|| halves[e.src.idx()].unwrap().1);
            let d = whole[e.dst.idx()].unwrap_or_else(|| halves[e.dst.idx()].unwrap().0);
            edges.push((s, d, e.volume));
        }
        // Weakly connected components via union-find.
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(s, d, _) in &edges {
            let (rs, rd) = (find(&mut parent, s), find(&mut parent, d));
            if rs != rd {
                parent[rs] = rd;
            }
        }
        // Deterministic component ids: order by smallest member node name.
        let mut root_min_rank: HashMap<usize, u32> = HashMap::new();
        for (i, &(origin, _)) in nodes.iter().enumerate() {
            let r = find(&mut parent, i);
            let rank = graph.lex_rank(origin);
            root_min_rank
                .entry(r)
                .and_modify(|m| *m = (*m).min(rank))
                .or_insert(rank);
        }
        let mut roots: Vec<(u32, usize)> =
            root_min_rank.iter().map(|(r, m)| (*m, *r)).collect();
        roots.sort();
        let renumber: HashMap<usize, usize> = roots
            .iter()
            .enumerate()
            .map(|(i, (_, r))| (*r, i))
            .collect();
        let component: Vec<usize> = (0..nodes.len())
            .map(|i| renumber[&find(&mut parent, i)])
            .collect();
        SplitView {
            nodes,
            edges,
            whole,
            halves,
            component,
            component_count: roots.len(),
        }
    }

    fn into_split_graph(self, _graph: &TaskGraph) -> SplitGraph {
        SplitGraph {
            nodes: self
                .nodes
                .iter()
                .map(|&(origin, part)| SplitNode { origin, part })
                .collect(),
            edges: self.edges,
            component: self.component,
            component_count: self.component_count,
        }
    }

    /// Detects a cycle (including self-loops) in the DAG of components
    /// connected through split buffers. Returns a human-readable witness.
    pub fn component_cycle(&self, graph: &TaskGraph) -> Option<String> {
        let mut comp_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for v in graph.node_indices() {
            if let Some((tail, head)) = self.halves[v.idx()] {
                let (ct, ch) = (self.component[tail], self.component[head]);
                if ct == ch {
                    return Some(format!(
                        "buffer `{}` has tail and head in the same streaming component",
                        graph.name(v)
                    ));
                }
                comp_edges.insert((ct, ch));
            }
        }
        // Kahn over the component DAG.
        let n = self.component_count;
        let mut indeg = vec![0usize; n];
        for &(_, d) in &comp_edges {
            indeg[d] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|c| indeg[*c] == 0).collect();
        let mut seen = 0;
        while let Some(c) = stack.pop() {
            seen += 1;
            for &(s, d) in &comp_edges {
                if s == c {
                    indeg[d] -= 1;
                    if indeg[d] == 0 {
                        stack.push(d);
                    }
                }
            }
        }
        if seen == n {
            None
        } else {
            Some("cycle among streaming components connected through buffers".into())
        }
    }
}

// ── JSON interchange ────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<[u64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    src: String,
    dst: String,
    volume: u64,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
}

impl TaskGraph {
    /// Parses the JSON graph format. Structural problems (schema, unknown
    /// kind, missing rate, dangling endpoints) are errors; canonicality is
    /// reported separately by [`TaskGraph::validate`].
    pub fn from_json(text: &str) -> Result<TaskGraph, CoreError> {
        let raw: RawGraph = serde_json::from_str(text)?;
        let mut b = TaskGraph::builder();
        for n in raw.nodes {
            let kind = match n.kind.as_str() {
                "source" | "sink" => {
                    if n.rate.is_some() {
                        return Err(CoreError::BadRate {
                            id: n.id,
                            reason: format!("rate is forbidden for kind `{}`", n.kind),
                        });
                    }
                    if n.kind == "source" {
                        NodeKind::Source
                    } else {
                        NodeKind::Sink
                    }
                }
                "compute" | "buffer" => {
                    let [num, den] = n.rate.ok_or_else(|| CoreError::BadRate {
                        id: n.id.clone(),
                        reason: format!("rate is required for kind `{}`", n.kind),
                    })?;
                    let rate = Rate::new(num, den).map_err(|_| CoreError::BadRate {
                        id: n.id.clone(),
                        reason: format!("rate {num}/{den} must be positive"),
                    })?;
                    if n.kind == "compute" {
                        NodeKind::Compute(rate)
                    } else {
                        NodeKind::Buffer(rate)
                    }
                }
                other => {
                    return Err(CoreError::UnknownNodeKind {
                        id: n.id,
                        kind: other.to_string(),
                    })
                }
            };
            b = b.node(n.id, kind);
        }
        for e in raw.edges {
            b = b.edge(e.src, e.dst, e.volume);
        }
        b.build()
    }

    /// Serializes to the JSON graph format, preserving node and edge order.
    pub fn to_json(&self) -> String {
        let raw = RawGraph {
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.name.clone(),
                    kind: match n.kind {
                        NodeKind::Source => "source".into(),
                        NodeKind::Sink => "sink".into(),
                        NodeKind::Compute(_) => "compute".into(),
                        NodeKind::Buffer(_) => "buffer".into(),
                    },
                    rate: n.kind.rate().map(|r| [r.num(), r.den()]),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    src: self.name(e.src).to_string(),
                    dst: self.name(e.dst).to_string(),
                    volume: e.volume,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("graph serialization cannot fail")
    }
}
