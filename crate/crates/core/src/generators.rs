//! Task graph generators.
//!
//! Four synthetic topologies with randomized canonical volumes (chain, FFT,
//! Gaussian elimination, tiled Cholesky), a small library of dataflow
//! patterns (outer product, matrix multiplication, vector normalization,
//! softmax), and a seeded random-DAG generator used by the test suites.
//!
//! Random volumes are drawn per equal-volume class: two producers share a
//! class whenever they feed a common consumer, since canonical consumers
//! read the same amount from every input edge. Each class gets one
//! log-uniform power of two from the configured range, which keeps every
//! generated graph canonical by construction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::graph::TaskGraph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    Chain { n: u64 },
    Fft { points: u64 },
    GaussianElim { m: u64 },
    Cholesky { tiles: u64 },
    Pattern(Pattern),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    OuterProduct { variant: u8, n: u64, m: u64 },
    MatMul { variant: u8, n: u64, k: u64, m: u64 },
    VectorNorm { variant: u8, n: u64 },
    Softmax { n: u64 },
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub topology: Topology,
    /// Inclusive bounds, both powers of two.
    pub volume_range: (u64, u64),
    pub seed: u64,
}

impl GenConfig {
    pub fn new(topology: Topology, volume_range: (u64, u64), seed: u64) -> Self {
        GenConfig {
            topology,
            volume_range,
            seed,
        }
    }
}

/// Generates the configured topology. Patterns have fixed volumes given by
/// their dimensions; the synthetic topologies draw volumes from the range,
/// deterministically in the seed.
pub fn generate(cfg: &GenConfig) -> Result<TaskGraph, CoreError> {
    let skel = match &cfg.topology {
        Topology::Pattern(p) => return pattern(p),
        Topology::Chain { n } => chain_skeleton(*n)?,
        Topology::Fft { points } => fft_skeleton(*points)?,
        Topology::GaussianElim { m } => gaussian_skeleton(*m)?,
        Topology::Cholesky { tiles } => cholesky_skeleton(*tiles)?,
    };
    realize(skel, cfg.volume_range, cfg.seed, VolumeMode::General)
}

// ── Skeletons ───────────────────────────────────────────────────────────────

struct Skeleton {
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
}

fn chain_skeleton(n: u64) -> Result<Skeleton, CoreError> {
    if n < 2 {
        return Err(CoreError::InvalidDimension("chain needs n >= 2".into()));
    }
    let width = (n - 1).to_string().len();
    let names = (0..n).map(|i| format!("t{i:0width$}")).collect();
    let edges = (0..n as usize - 1).map(|i| (i, i + 1)).collect();
    Ok(Skeleton { names, edges })
}

/// Radix-2 FFT task graph: a binary tree of recursive-call tasks feeding
/// `log2(points)` stages of butterflies wired by the standard pattern
/// (stage `s` pairs lanes at distance `2^s`).
fn fft_skeleton(points: u64) -> Result<Skeleton, CoreError> {
    if points < 2 || !points.is_power_of_two() {
        return Err(CoreError::InvalidDimension(
            "fft needs a power-of-two point count >= 2".into(),
        ));
    }
    let n = points as usize;
    let levels = n.trailing_zeros() as usize;
    let mut names = Vec::new();
    let mut edges = Vec::new();
    // Recursion tree: level d holds 2^d call tasks.
    let mut row_start = vec![0usize; levels + 1];
    for d in 0..=levels {
        row_start[d] = names.len();
        for i in 0..(1usize << d) {
            names.push(format!("call_{d}_{i:02}"));
        }
        if d > 0 {
            for i in 0..(1usize << d) {
                edges.push((row_start[d - 1] + i / 2, row_start[d] + i));
            }
        }
    }
    // Butterfly stages; stage 0 reads the recursion leaves.
    let mut prev_row = row_start[levels];
    for s in 0..levels {
        let row = names.len();
        for i in 0..n {
            names.push(format!("bfly_{s}_{i:02}"));
        }
        for i in 0..n {
            edges.push((prev_row + i, row + i));
            edges.push((prev_row + (i ^ (1 << s)), row + i));
        }
        prev_row = row;
    }
    Ok(Skeleton { names, edges })
}

/// Gaussian elimination task graph: per step `k`, one pivot task feeding the
/// row updates, which feed the next step.
fn gaussian_skeleton(m: u64) -> Result<Skeleton, CoreError> {
    if m < 2 {
        return Err(CoreError::InvalidDimension(
            "gaussian elimination needs m >= 2".into(),
        ));
    }
    let m = m as usize;
    let width = m.to_string().len();
    let mut names = Vec::new();
    let mut index = std::collections::HashMap::new();
    for k in 1..m {
        index.insert(format!("piv_{k:0width$}"), names.len());
        names.push(format!("piv_{k:0width$}"));
        for j in k + 1..=m {
            index.insert(format!("upd_{k:0width$}_{j:0width$}"), names.len());
            names.push(format!("upd_{k:0width$}_{j:0width$}"));
        }
    }
    let at = |s: String| index[&s];
    let mut edges = Vec::new();
    for k in 1..m {
        for j in k + 1..=m {
            edges.push((at(format!("piv_{k:0width$}")), at(format!("upd_{k:0width$}_{j:0width$}"))));
        }
        if k + 1 < m {
            edges.push((
                at(format!("upd_{k:0width$}_{:0width$}", k + 1)),
                at(format!("piv_{:0width$}", k + 1)),
            ));
        }
        for j in k + 2..=m {
            if k + 1 < j {
                edges.push((
                    at(format!("upd_{k:0width$}_{j:0width$}")),
                    at(format!("upd_{:0width$}_{j:0width$}", k + 1)),
                ));
            }
        }
    }
    Ok(Skeleton { names, edges })
}

/// Tiled Cholesky factorization task graph (factor, triangular solves,
/// symmetric rank updates and the trailing matrix products per step).
fn cholesky_skeleton(tiles: u64) -> Result<Skeleton, CoreError> {
    if tiles < 2 {
        return Err(CoreError::InvalidDimension("cholesky needs t >= 2".into()));
    }
    let t = tiles as usize;
    let width = t.to_string().len();
    let mut names = Vec::new();
    let mut index = std::collections::HashMap::new();
    let add = |name: String, index: &mut std::collections::HashMap<String, usize>,
                   names: &mut Vec<String>| {
        index.insert(name.clone(), names.len());
        names.push(name);
    };
    for k in 1..=t {
        add(format!("potrf_{k:0width$}"), &mut index, &mut names);
        for i in k + 1..=t {
            add(format!("trsm_{k:0width$}_{i:0width$}"), &mut index, &mut names);
        }
        for i in k + 1..=t {
            add(format!("syrk_{k:0width$}_{i:0width$}"), &mut index, &mut names);
        }
        for i in k + 1..=t {
            for j in k + 1..i {
                add(
                    format!("gemm_{k:0width$}_{i:0width$}_{j:0width$}"),
                    &mut index,
                    &mut names,
                );
            }
        }
    }
    let at = |s: &str| index[s];
    let potrf = |k: usize| format!("potrf_{k:0width$}");
    let trsm = |k: usize, i: usize| format!("trsm_{k:0width$}_{i:0width$}");
    let syrk = |k: usize, i: usize| format!("syrk_{k:0width$}_{i:0width$}");
    let gemm = |k: usize, i: usize, j: usize| {
        format!("gemm_{k:0width$}_{i:0width$}_{j:0width$}")
    };
    let mut edges = Vec::new();
    for k in 1..=t {
        for i in k + 1..=t {
            edges.push((at(&potrf(k)), at(&trsm(k, i))));
            edges.push((at(&trsm(k, i)), at(&syrk(k, i))));
            if k + 1 < i {
                edges.push((at(&syrk(k, i)), at(&syrk(k + 1, i))));
            } else {
                edges.push((at(&syrk(k, i)), at(&potrf(i))));
            }
            for j in k + 1..i {
                edges.push((at(&trsm(k, i)), at(&gemm(k, i, j))));
                edges.push((at(&trsm(k, j)), at(&gemm(k, i, j))));
                if k + 1 < j {
                    edges.push((at(&gemm(k, i, j)), at(&gemm(k + 1, i, j))));
                } else {
                    edges.push((at(&gemm(k, i, j)), at(&trsm(j, i))));
                }
            }
        }
    }
    Ok(Skeleton { names, edges })
}

// ── Volume assignment ───────────────────────────────────────────────────────

#[derive(Clone, Copy, PartialEq, Eq)]
enum VolumeMode {
    /// Independent volume per class: mixed element-wise, down- and
    /// upsampler nodes.
    General,
    /// One volume for every class.
    Elementwise,
    /// Volumes never increase along edges.
    NonIncreasing,
}

fn check_range(range: (u64, u64)) -> Result<(u32, u32), CoreError> {
    let (lo, hi) = range;
    if lo == 0 || hi == 0 || !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
        return Err(CoreError::InvalidVolumeRange(format!(
            "bounds must be powers of two with min <= max, got [{lo}, {hi}]"
        )));
    }
    Ok((lo.trailing_zeros(), hi.trailing_zeros()))
}

/// Turns a skeleton into a canonical graph: entry tasks become sources,
/// exit tasks sinks, everything else compute nodes with the rate implied by
/// the class volumes.
fn realize(
    skel: Skeleton,
    range: (u64, u64),
    seed: u64,
    mode: VolumeMode,
) -> Result<TaskGraph, CoreError> {
    let (emin, emax) = check_range(range)?;
    let n = skel.names.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in &skel.edges {
        preds[v].push(u);
        succs[u].push(v);
    }

    // Producers feeding a common consumer share one output-volume class.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for group in &preds {
        for w in group.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                // Deterministic union: smaller index wins as root.
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut class_exp: Vec<Option<u32>> = vec![None; n];
    let shared = if mode == VolumeMode::Elementwise {
        Some(rng.gen_range(emin..=emax))
    } else {
        None
    };
    for (v, succ) in succs.iter().enumerate() {
        if succ.is_empty() {
            continue;
        }
        let root = find(&mut parent, v);
        if class_exp[root].is_none() {
            class_exp[root] = Some(shared.unwrap_or_else(|| rng.gen_range(emin..=emax)));
        }
    }
    if mode == VolumeMode::NonIncreasing {
        // Volumes may not grow along any edge; lower offending classes to a
        // fixpoint (values only decrease, so this terminates).
        loop {
            let mut changed = false;
            for &(u, v) in &skel.edges {
                if succs[v].is_empty() {
                    continue;
                }
                let ru = find(&mut parent, u);
                let rv = find(&mut parent, v);
                let (eu, ev) = (class_exp[ru].unwrap(), class_exp[rv].unwrap());
                if ev > eu {
                    class_exp[rv] = Some(eu);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    let volume = |parent: &mut Vec<usize>, class_exp: &[Option<u32>], v: usize| -> u64 {
        1u64 << class_exp[find(parent, v)].expect("producing node has a class volume")
    };
    let mut b = TaskGraph::builder();
    for v in 0..n {
        let name = skel.names[v].clone();
        b = if preds[v].is_empty() {
            b.source(name)
        } else if succs[v].is_empty() {
            b.sink(name)
        } else {
            let k_out = volume(&mut parent, &class_exp, v);
            let k_in = volume(&mut parent, &class_exp, preds[v][0]);
            b.compute(name, k_out, k_in)
        };
    }
    for &(u, v) in &skel.edges {
        let vol = volume(&mut parent, &class_exp, u);
        b = b.edge(skel.names[u].clone(), skel.names[v].clone(), vol);
    }
    let graph = b.build()?;
    debug_assert!(graph.validate().is_ok(), "generated graph must validate");
    Ok(graph)
}

// ── Patterns ────────────────────────────────────────────────────────────────

/// Builds one of the dataflow patterns. Dimensions fix every volume, so
/// patterns take no seed.
pub fn pattern(p: &Pattern) -> Result<TaskGraph, CoreError> {
    match *p {
        Pattern::OuterProduct { variant, n, m } => outer_product(variant, n, m),
        Pattern::MatMul { variant, n, k, m } => matmul(variant, n, k, m),
        Pattern::VectorNorm { variant, n } => vector_norm(variant, n),
        Pattern::Softmax { n } => softmax(n),
    }
}

fn dims_positive(dims: &[u64]) -> Result<(), CoreError> {
    if dims.iter().any(|d| *d < 2) {
        return Err(CoreError::InvalidDimension(
            "pattern dimensions must be >= 2".into(),
        ));
    }
    Ok(())
}

/// Outer product of an n-vector and an m-vector. Variant 1 streams `u`
/// through an upsampler and buffers `v`; variant 2 is the mirror image;
/// variant 3 buffers both inputs.
fn outer_product(variant: u8, n: u64, m: u64) -> Result<TaskGraph, CoreError> {
    dims_positive(&[n, m])?;
    let nm = n
        .checked_mul(m)
        .ok_or(CoreError::Overflow("outer product volume"))?;
    let b = TaskGraph::builder().source("u").source("v");
    let b = match variant {
        1 => b
            .compute("ups", m, 1)
            .buffer("vbuf", n, 1)
            .edge("u", "ups", n)
            .edge("v", "vbuf", m)
            .edge("ups", "mul", nm)
            .edge("vbuf", "mul", nm),
        2 => b
            .compute("ups", n, 1)
            .buffer("ubuf", m, 1)
            .edge("v", "ups", m)
            .edge("u", "ubuf", n)
            .edge("ups", "mul", nm)
            .edge("ubuf", "mul", nm),
        3 => b
            .buffer("ubuf", m, 1)
            .buffer("vbuf", n, 1)
            .edge("u", "ubuf", n)
            .edge("v", "vbuf", m)
            .edge("ubuf", "mul", nm)
            .edge("vbuf", "mul", nm),
        v => {
            return Err(CoreError::InvalidDimension(format!(
                "outer product has variants 1-3, got {v}"
            )))
        }
    };
    b.compute("mul", 1, 1)
        .sink("out")
        .edge("mul", "out", nm)
        .build()
}

/// Matrix multiplication `C = A * B` with `A` n-by-k and `B` k-by-m.
/// Variant 1 buffers both operands into a single downsampler; variant 2
/// streams `A` to one matrix-vector task per output column; variant 3
/// splits along `k` into outer-product branches summed by a tree.
fn matmul(variant: u8, n: u64, k: u64, m: u64) -> Result<TaskGraph, CoreError> {
    dims_positive(&[n, k, m])?;
    let nk = n.checked_mul(k).ok_or(CoreError::Overflow("matmul volume"))?;
    let km = k.checked_mul(m).ok_or(CoreError::Overflow("matmul volume"))?;
    let nm = n.checked_mul(m).ok_or(CoreError::Overflow("matmul volume"))?;
    let nkm = nk
        .checked_mul(m)
        .ok_or(CoreError::Overflow("matmul volume"))?;
    match variant {
        1 => TaskGraph::builder()
            .source("a")
            .source("b")
            .buffer("abuf", m, 1)
            .buffer("bbuf", n, 1)
            .compute("mul", 1, k)
            .sink("c")
            .edge("a", "abuf", nk)
            .edge("b", "bbuf", km)
            .edge("abuf", "mul", nkm)
            .edge("bbuf", "mul", nkm)
            .edge("mul", "c", nm)
            .build(),
        2 => {
            let width = (m - 1).to_string().len();
            let mut b = TaskGraph::builder()
                .source("a")
                .source("b")
                .compute("rep", 1, 1)
                .buffer("bbuf", n, m)
                .sink("c")
                .edge("a", "rep", nk)
                .edge("b", "bbuf", km);
            for i in 0..m {
                let d = format!("mv_{i:0width$}");
                b = b
                    .compute(&d, 1, k)
                    .edge("rep", &d, nk)
                    .edge("bbuf", &d, nk)
                    .edge(&d, "c", n);
            }
            b.build()
        }
        3 => {
            let width = (k - 1).to_string().len();
            let mut b = TaskGraph::builder().source("a").source("b").sink("c");
            let mut partial: Vec<String> = Vec::new();
            for i in 0..k {
                let ups = format!("ups_{i:0width$}");
                let rbuf = format!("rowbuf_{i:0width$}");
                let mul = format!("mul_{i:0width$}");
                b = b
                    .compute(&ups, m, 1)
                    .buffer(&rbuf, n, 1)
                    .compute(&mul, 1, 1)
                    .edge("a", &ups, n)
                    .edge("b", &rbuf, m)
                    .edge(&ups, &mul, nm)
                    .edge(&rbuf, &mul, nm);
                partial.push(mul);
            }
            let mut acc = partial[0].clone();
            for (j, next) in partial.iter().enumerate().skip(1) {
                let add = format!("add_{:0width$}", j - 1);
                b = b
                    .compute(&add, 1, 1)
                    .edge(&acc, &add, nm)
                    .edge(next, &add, nm);
                acc = add;
            }
            b.edge(&acc, "c", nm).build()
        }
        v => Err(CoreError::InvalidDimension(format!(
            "matmul has variants 1-3, got {v}"
        ))),
    }
}

/// Vector normalization `y = x / ||x||`. Variant 1 is the fully staged
/// form: the input is buffered before the norm reduction, the norm value is
/// buffered before the divisions, and the final stage re-reads `x` from
/// memory. Variant 2 streams `x` directly to both consumers, which puts the
/// norm buffer on an undirected cycle; it is generated for study but fails
/// the buffer-placement rule by design.
fn vector_norm(variant: u8, n: u64) -> Result<TaskGraph, CoreError> {
    dims_positive(&[n])?;
    match variant {
        1 => TaskGraph::builder()
            .source("x0")
            .buffer("xbuf", 1, 1)
            .compute("norm", 1, n)
            .buffer("nbuf", n, 1)
            .source("x1")
            .compute("div", 1, 1)
            .sink("y")
            .edge("x0", "xbuf", n)
            .edge("xbuf", "norm", n)
            .edge("norm", "nbuf", 1)
            .edge("nbuf", "div", n)
            .edge("x1", "div", n)
            .edge("div", "y", n)
            .build(),
        2 => TaskGraph::builder()
            .source("x0")
            .compute("norm", 1, n)
            .buffer("nbuf", n, 1)
            .compute("div", 1, 1)
            .sink("y")
            .edge("x0", "norm", n)
            .edge("x0", "div", n)
            .edge("norm", "nbuf", 1)
            .edge("nbuf", "div", n)
            .edge("div", "y", n)
            .build(),
        v => Err(CoreError::InvalidDimension(format!(
            "vector normalization has variants 1-2, got {v}"
        ))),
    }
}

/// Numerically stable softmax in three passes over the input stream: a max
/// reduction, the exponentiated sum, and the final division. The two scalar
/// reductions are buffered and replicated; each pass re-reads `x` from
/// memory, so the buffers split the graph into three streaming stages.
fn softmax(n: u64) -> Result<TaskGraph, CoreError> {
    dims_positive(&[n])?;
    TaskGraph::builder()
        .source("x0")
        .compute("max", 1, n)
        .buffer("maxbuf", n, 1)
        .source("x1")
        .compute("sub", 1, 1)
        .compute("exp", 1, 1)
        .compute("sum", 1, n)
        .buffer("sumbuf", n, 1)
        .source("x2")
        .compute("div", 1, 1)
        .sink("y")
        .edge("x0", "max", n)
        .edge("max", "maxbuf", 1)
        .edge("maxbuf", "sub", n)
        .edge("x1", "sub", n)
        .edge("sub", "exp", n)
        .edge("exp", "sum", n)
        .edge("sum", "sumbuf", 1)
        .edge("sumbuf", "div", n)
        .edge("x2", "div", n)
        .edge("div", "y", n)
        .build()
}

// ── Random DAGs ─────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomMode {
    /// Mixed node types.
    General,
    /// Every volume equal: element-wise graph.
    Elementwise,
    /// Element-wise and downsampler nodes only.
    ElemwiseDownsampler,
}

#[derive(Clone, Debug)]
pub struct RandomDagConfig {
    pub nodes: u32,
    pub mode: RandomMode,
    pub volume_range: (u64, u64),
    pub seed: u64,
}

/// Seeded random canonical DAG, buffer-free. Node `i > 0` draws one to
/// three predecessors among earlier nodes (occasionally none, adding a
/// source); entry nodes become sources and exit nodes sinks.
pub fn random_dag(cfg: &RandomDagConfig) -> Result<TaskGraph, CoreError> {
    if cfg.nodes < 2 {
        return Err(CoreError::InvalidDimension("random dag needs >= 2 nodes".into()));
    }
    let n = cfg.nodes as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = (n - 1).to_string().len();
    let names: Vec<String> = (0..n).map(|i| format!("t{i:0width$}")).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut has_succ = vec![false; n];
    for v in 1..n {
        let extra_source = v + 1 < n && rng.gen_bool(0.15);
        if extra_source {
            continue;
        }
        let degree = rng.gen_range(1..=3usize.min(v));
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < degree {
            picked.insert(rng.gen_range(0..v));
        }
        for u in picked {
            edges.push((u, v));
            has_succ[u] = true;
        }
    }
    // No node may end up isolated.
    for v in 0..n {
        let has_pred = edges.iter().any(|&(_, d)| d == v);
        if !has_pred && !has_succ[v] {
            if v + 1 < n {
                let d = rng.gen_range(v + 1..n);
                edges.push((v, d));
                has_succ[v] = true;
            } else {
                let s = rng.gen_range(0..v);
                edges.push((s, v));
                has_succ[s] = true;
            }
        }
    }
    let mode = match cfg.mode {
        RandomMode::General => VolumeMode::General,
        RandomMode::Elementwise => VolumeMode::Elementwise,
        RandomMode::ElemwiseDownsampler => VolumeMode::NonIncreasing,
    };
    realize(
        Skeleton { names, edges },
        cfg.volume_range,
        rng.gen(),
        mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::streaming_depth;
    use crate::graph::split_buffers;

    fn gen(topology: Topology, seed: u64) -> TaskGraph {
        generate(&GenConfig::new(topology, (8, 256), seed)).unwrap()
    }

    #[test]
    fn fft_task_count() {
        for seed in 0..20 {
            let g = gen(Topology::Fft { points: 8 }, seed);
            assert_eq!(g.node_count(), 39);
            assert!(g.validate().is_ok());
        }
    }

    #[test]
    fn gaussian_task_count() {
        for seed in 0..20 {
            let g = gen(Topology::GaussianElim { m: 5 }, seed);
            assert_eq!(g.node_count(), 14);
            assert!(g.validate().is_ok());
        }
    }

    #[test]
    fn cholesky_task_count() {
        for seed in 0..20 {
            let g = gen(Topology::Cholesky { tiles: 4 }, seed);
            assert_eq!(g.node_count(), 20);
            assert!(g.validate().is_ok());
        }
        let g = gen(Topology::Cholesky { tiles: 5 }, 0);
        assert_eq!(g.node_count(), 35);
    }

    #[test]
    fn chain_fixed_volume_is_elementwise() {
        let g = generate(&GenConfig::new(Topology::Chain { n: 8 }, (16, 16), 1)).unwrap();
        assert!(g.validate().is_ok());
        for e in g.edges() {
            assert_eq!(e.volume, 16);
        }
    }

    #[test]
    fn seed_determinism() {
        let a = gen(Topology::Cholesky { tiles: 4 }, 7);
        let b = gen(Topology::Cholesky { tiles: 4 }, 7);
        assert_eq!(a.to_json(), b.to_json());
        let c = gen(Topology::Cholesky { tiles: 4 }, 8);
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn outer_product_variant1_volumes() {
        let g = pattern(&Pattern::OuterProduct {
            variant: 1,
            n: 4,
            m: 8,
        })
        .unwrap();
        assert!(g.validate().is_ok());
        let mul = g.find("mul").unwrap();
        assert_eq!(g.k_in(mul), 32);
        assert_eq!(g.k_out(mul), 32);
    }

    #[test]
    fn matmul_variant1_rate() {
        let g = pattern(&Pattern::MatMul {
            variant: 1,
            n: 4,
            k: 4,
            m: 4,
        })
        .unwrap();
        assert!(g.validate().is_ok());
        let mul = g.find("mul").unwrap();
        match g.kind(mul) {
            crate::graph::NodeKind::Compute(r) => {
                assert_eq!((r.num(), r.den()), (1, 4));
            }
            other => panic!("expected compute, got {other:?}"),
        }
    }

    #[test]
    fn matmul_other_variants_validate() {
        for variant in [2u8, 3] {
            let g = pattern(&Pattern::MatMul {
                variant,
                n: 4,
                k: 3,
                m: 5,
            })
            .unwrap();
            assert!(g.validate().is_ok(), "variant {variant}");
        }
    }

    #[test]
    fn vector_norm_staged_has_three_components_in_a_path() {
        let g = pattern(&Pattern::VectorNorm { variant: 1, n: 16 }).unwrap();
        assert!(g.validate().is_ok());
        let s = split_buffers(&g).unwrap();
        assert_eq!(s.component_count, 3);
        let h = crate::analysis::supernode_dag(&g).unwrap();
        let mut edges = h.edges.clone();
        edges.sort();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn cholesky_round_trips_through_json() {
        let g = gen(Topology::Cholesky { tiles: 4 }, 3);
        let text = g.to_json();
        let back = TaskGraph::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert!(back.validate().is_ok());
        assert_eq!(back.node_count(), g.node_count());
        assert_eq!(back.edge_count(), g.edge_count());
    }

    #[test]
    fn vector_norm_streaming_variant_fails_placement() {
        let g = pattern(&Pattern::VectorNorm { variant: 2, n: 16 }).unwrap();
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, crate::graph::Violation::BufferPlacement { .. })));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn softmax_structure() {
        let g = pattern(&Pattern::Softmax { n: 16 }).unwrap();
        assert!(g.validate().is_ok());
        let buffers = g
            .node_indices()
            .filter(|v| g.is_buffer(*v))
            .count();
        assert_eq!(buffers, 2);
        let s = split_buffers(&g).unwrap();
        assert_eq!(s.component_count, 3);
    }

    #[test]
    fn softmax_supernode_path_and_depth() {
        let g = pattern(&Pattern::Softmax { n: 64 }).unwrap();
        let h = crate::analysis::supernode_dag(&g).unwrap();
        assert_eq!(h.supernodes.len(), 3);
        assert_eq!(h.edges.len(), 2);
        // Stage depths 66 + 68 + 66 along the path.
        assert_eq!(streaming_depth(&g).unwrap(), 200);
    }

    #[test]
    fn random_dag_modes() {
        for seed in 0..30u64 {
            let g = random_dag(&RandomDagConfig {
                nodes: 12,
                mode: RandomMode::General,
                volume_range: (8, 64),
                seed,
            })
            .unwrap();
            assert!(g.validate().is_ok(), "seed {seed}: {}", g.validate());

            let ew = random_dag(&RandomDagConfig {
                nodes: 12,
                mode: RandomMode::Elementwise,
                volume_range: (8, 64),
                seed,
            })
            .unwrap();
            assert!(ew.validate().is_ok());
            let vols: std::collections::BTreeSet<u64> =
                ew.edges().iter().map(|e| e.volume).collect();
            assert_eq!(vols.len(), 1, "elementwise graphs carry one volume");

            let ds = random_dag(&RandomDagConfig {
                nodes: 12,
                mode: RandomMode::ElemwiseDownsampler,
                volume_range: (8, 64),
                seed,
            })
            .unwrap();
            assert!(ds.validate().is_ok());
            for v in ds.node_indices() {
                if let crate::graph::NodeKind::Compute(r) = ds.kind(v) {
                    assert!(!r.is_upsampler(), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(generate(&GenConfig::new(Topology::Chain { n: 1 }, (8, 8), 0)).is_err());
        assert!(generate(&GenConfig::new(Topology::Fft { points: 6 }, (8, 8), 0)).is_err());
        assert!(matches!(
            generate(&GenConfig::new(Topology::Chain { n: 4 }, (8, 7), 0)),
            Err(CoreError::InvalidVolumeRange(_))
        ));
    }
}
