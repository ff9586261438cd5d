//! Command-line front end: generate, validate, analyze, partition, schedule,
//! size buffers, simulate, and run benchmark sweeps over canonical task
//! graphs. All outputs are JSON (single runs) or CSV (sweeps) and are
//! byte-stable for fixed inputs and seeds.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use flowsched::analysis::analyze;
use flowsched::buffers::buffer_plan;
use flowsched::generators::{generate, GenConfig, Pattern, Topology};
use flowsched::graph::TaskGraph;
use flowsched::metrics::compute_metrics;
use flowsched::partition::{
    partition_downsampler, partition_elementwise, partition_greedy, PartitionVariant,
    SpatialPartition,
};
use flowsched::rational::{q_to_f64, Q};
use flowsched::schedule::{schedule_nonstreaming, schedule_streaming, Schedule};
use flowsched::sim::simulate;

#[derive(Parser)]
#[command(name = "flowsched", version, about = "Streaming task graph scheduling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task graph and write it as JSON.
    Generate(GenerateArgs),
    /// Check a graph against the canonicality rules.
    Validate(GraphIn),
    /// Streaming intervals, levels, work and streaming depth.
    Analyze(GraphIn),
    /// Partition a graph into spatial blocks.
    Partition(PartitionArgs),
    /// Compute a schedule (streaming variants or the non-streaming baseline).
    Schedule(PartitionArgs),
    /// FIFO capacities for deadlock-free streaming execution.
    Buffers(PartitionArgs),
    /// Run the discrete-event simulation of a schedule.
    Simulate(PartitionArgs),
    /// Sweep graphs x PEs x variants and emit one CSV row per run.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TopologyArgs {
    /// chain | fft | gaussian | cholesky | outer-product | matmul |
    /// vector-norm | softmax
    #[arg(long)]
    topology: TopologyKind,
    /// Tasks (chain), points (fft), or first pattern dimension.
    #[arg(long)]
    n: Option<u64>,
    /// Matrix size (gaussian) or second pattern dimension.
    #[arg(long)]
    m: Option<u64>,
    /// Inner dimension (matmul).
    #[arg(long)]
    k: Option<u64>,
    /// Tile count (cholesky).
    #[arg(long)]
    t: Option<u64>,
    /// Pattern variant (1-3).
    #[arg(long, default_value_t = 1)]
    variant_no: u8,
    /// Smallest random edge volume (power of two).
    #[arg(long, default_value_t = 8)]
    vol_min: u64,
    /// Largest random edge volume (power of two).
    #[arg(long, default_value_t = 256)]
    vol_max: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyKind {
    Chain,
    Fft,
    Gaussian,
    Cholesky,
    OuterProduct,
    Matmul,
    VectorNorm,
    Softmax,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GraphIn {
    /// Input graph JSON.
    #[arg(long)]
    graph: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Number of processing elements.
    #[arg(long)]
    p: u32,
    #[arg(long, value_enum, default_value_t = VariantArg::SbRlx)]
    variant: VariantArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    SbLts,
    SbRlx,
    Elemwise,
    Downsampler,
    Nonstreaming,
}

impl VariantArg {
    fn partition_variant(self) -> Option<PartitionVariant> {
        match self {
            VariantArg::SbLts => Some(PartitionVariant::SbLts),
            VariantArg::SbRlx => Some(PartitionVariant::SbRlx),
            VariantArg::Elemwise => Some(PartitionVariant::ElemwiseLevel),
            VariantArg::Downsampler => Some(PartitionVariant::DownsamplerWork),
            VariantArg::Nonstreaming => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            VariantArg::SbLts => "sb-lts",
            VariantArg::SbRlx => "sb-rlx",
            VariantArg::Elemwise => "elemwise",
            VariantArg::Downsampler => "downsampler",
            VariantArg::Nonstreaming => "nonstreaming",
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    /// Comma-separated PE counts.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<u32>,
    /// Comma-separated variants.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [VariantArg::SbLts, VariantArg::SbRlx, VariantArg::Nonstreaming])]
    variants: Vec<VariantArg>,
    /// Number of random graphs.
    #[arg(long, default_value_t = 100)]
    graphs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let json = serde_json::json!({ "error": err.to_string() });
            eprintln!("{json}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => {
            let graph = build_graph(&args.topology, args.seed)?;
            emit(&args.output, &graph.to_json())?;
        }
        Command::Validate(args) => {
            let graph = read_graph(&args.graph)?;
            let report = graph.validate();
            let body = serde_json::json!({
                "ok": report.is_ok(),
                "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            });
            emit(&args.output, &serde_json::to_string_pretty(&body)?)?;
            if !report.is_ok() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Analyze(args) => {
            let graph = load_valid(&args.graph)?;
            let a = analyze(&graph)?;
            let body = AnalysisOut {
                t1: a.t1,
                streaming_depth: a.streaming_depth,
                nodes: graph
                    .node_indices()
                    .map(|v| NodeAnalysisOut {
                        id: graph.name(v).to_string(),
                        si_in: ratio(a.si[v.idx()].si_in),
                        si_out: ratio(a.si[v.idx()].si_out),
                        level: ratio(a.level[v.idx()]),
                        work: a.work[v.idx()],
                        wcc: a.wcc_id[v.idx()],
                    })
                    .collect(),
                supernodes: a
                    .supernodes
                    .supernodes
                    .iter()
                    .map(|s| SupernodeOut {
                        members: s.members.iter().map(|v| graph.name(*v).to_string()).collect(),
                        max_volume: s.max_volume,
                        levels: ratio(s.levels),
                        depth: ratio(s.depth),
                    })
                    .collect(),
                supernode_edges: a.supernodes.edges.clone(),
            };
            emit(&args.output, &serde_json::to_string_pretty(&body)?)?;
        }
        Command::Partition(args) => {
            let graph = load_valid(&args.graph)?;
            let variant = args
                .variant
                .partition_variant()
                .ok_or_else(|| anyhow::anyhow!("partition requires a streaming variant"))?;
            let part = make_partition(&graph, args.p, variant)?;
            let body = serde_json::json!({
                "variant": args.variant.name(),
                "p": args.p,
                "blocks": part.blocks.iter()
                    .map(|b| b.iter().map(|v| graph.name(*v).to_string()).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            });
            emit(&args.output, &serde_json::to_string_pretty(&body)?)?;
        }
        Command::Schedule(args) => {
            let graph = load_valid(&args.graph)?;
            let schedule = make_schedule(&graph, args.p, args.variant)?;
            emit(
                &args.output,
                &serde_json::to_string_pretty(&schedule_out(&graph, &schedule))?,
            )?;
        }
        Command::Buffers(args) => {
            let graph = load_valid(&args.graph)?;
            let variant = args
                .variant
                .partition_variant()
                .ok_or_else(|| anyhow::anyhow!("buffer sizing requires a streaming variant"))?;
            let part = make_partition(&graph, args.p, variant)?;
            let schedule = schedule_streaming(&graph, &part)?;
            let plan = buffer_plan(&graph, &part, &schedule)?;
            let rows: Vec<_> = plan
                .streaming_edges()
                .map(|(e, cap)| {
                    let edge = graph.edge(e);
                    serde_json::json!({
                        "src": graph.name(edge.src),
                        "dst": graph.name(edge.dst),
                        "capacity": cap,
                    })
                })
                .collect();
            emit(&args.output, &serde_json::to_string_pretty(&rows)?)?;
        }
        Command::Simulate(args) => {
            let graph = load_valid(&args.graph)?;
            let variant = args
                .variant
                .partition_variant()
                .ok_or_else(|| anyhow::anyhow!("simulation requires a streaming variant"))?;
            let part = make_partition(&graph, args.p, variant)?;
            let schedule = schedule_streaming(&graph, &part)?;
            let plan = buffer_plan(&graph, &part, &schedule)?;
            let report = simulate(&graph, &part, &schedule, &plan)?;
            let body = serde_json::json!({
                "scheduled_makespan": schedule.makespan,
                "simulated_makespan": report.simulated_makespan,
                "deadlocked": report.deadlocked,
                "blocked_cycle": report.blocked_cycle.as_ref().map(|c| {
                    c.iter().map(|v| graph.name(*v).to_string()).collect::<Vec<_>>()
                }),
                "relative_error": report.relative_error.map(ratio),
                "emissions": graph.node_indices().map(|v| serde_json::json!({
                    "id": graph.name(v),
                    "first": report.emissions[v.idx()].map(|e| e.0),
                    "last": report.emissions[v.idx()].map(|e| e.1),
                })).collect::<Vec<_>>(),
            });
            emit(&args.output, &serde_json::to_string_pretty(&body)?)?;
        }
        Command::Bench(args) => {
            let csv = run_bench(&args)?;
            emit(&args.output, &csv)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn build_graph(args: &TopologyArgs, seed: u64) -> anyhow::Result<TaskGraph> {
    let need = |value: Option<u64>, flag: &str| {
        value.ok_or_else(|| anyhow::anyhow!("--{flag} is required for this topology"))
    };
    let topology = match args.topology {
        TopologyKind::Chain => Topology::Chain { n: need(args.n, "n")? },
        TopologyKind::Fft => Topology::Fft { points: need(args.n, "n")? },
        TopologyKind::Gaussian => Topology::GaussianElim { m: need(args.m, "m")? },
        TopologyKind::Cholesky => Topology::Cholesky { tiles: need(args.t, "t")? },
        TopologyKind::OuterProduct => Topology::Pattern(Pattern::OuterProduct {
            variant: args.variant_no,
            n: need(args.n, "n")?,
            m: need(args.m, "m")?,
        }),
        TopologyKind::Matmul => Topology::Pattern(Pattern::MatMul {
            variant: args.variant_no,
            n: need(args.n, "n")?,
            k: need(args.k, "k")?,
            m: need(args.m, "m")?,
        }),
        TopologyKind::VectorNorm => Topology::Pattern(Pattern::VectorNorm {
            variant: args.variant_no,
            n: need(args.n, "n")?,
        }),
        TopologyKind::Softmax => Topology::Pattern(Pattern::Softmax { n: need(args.n, "n")? }),
    };
    Ok(generate(&GenConfig::new(
        topology,
        (args.vol_min, args.vol_max),
        seed,
    ))?)
}

fn read_graph(path: &PathBuf) -> anyhow::Result<TaskGraph> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(TaskGraph::from_json(&text)?)
}

fn load_valid(path: &PathBuf) -> anyhow::Result<TaskGraph> {
    let graph = read_graph(path)?;
    graph.ensure_valid()?;
    Ok(graph)
}

fn make_partition(
    graph: &TaskGraph,
    p: u32,
    variant: PartitionVariant,
) -> anyhow::Result<SpatialPartition> {
    Ok(match variant {
        PartitionVariant::SbLts | PartitionVariant::SbRlx => partition_greedy(graph, p, variant)?,
        PartitionVariant::ElemwiseLevel => partition_elementwise(graph, p)?,
        PartitionVariant::DownsamplerWork => partition_downsampler(graph, p)?,
    })
}

fn make_schedule(graph: &TaskGraph, p: u32, variant: VariantArg) -> anyhow::Result<Schedule> {
    Ok(match variant.partition_variant() {
        None => schedule_nonstreaming(graph, p)?,
        Some(v) => {
            let part = make_partition(graph, p, v)?;
            schedule_streaming(graph, &part)?
        }
    })
}

#[derive(Serialize)]
struct AnalysisOut {
    t1: u64,
    streaming_depth: u64,
    nodes: Vec<NodeAnalysisOut>,
    supernodes: Vec<SupernodeOut>,
    supernode_edges: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct NodeAnalysisOut {
    id: String,
    si_in: [i128; 2],
    si_out: [i128; 2],
    level: [i128; 2],
    work: u64,
    wcc: usize,
}

#[derive(Serialize)]
struct SupernodeOut {
    members: Vec<String>,
    max_volume: u64,
    levels: [i128; 2],
    depth: [i128; 2],
}

fn ratio(x: Q) -> [i128; 2] {
    [*x.numer(), *x.denom()]
}

fn schedule_out(graph: &TaskGraph, schedule: &Schedule) -> serde_json::Value {
    let tasks: Vec<_> = schedule
        .entries()
        .map(|t| {
            serde_json::json!({
                "task": graph.name(t.node),
                "pe": t.pe,
                "block": t.block,
                "st": t.st,
                "fo": t.fo,
                "lo": t.lo,
            })
        })
        .collect();
    serde_json::json!({
        "p": schedule.p,
        "variant": schedule.kind.to_string(),
        "makespan": schedule.makespan,
        "tasks": tasks,
    })
}

const CSV_HEADER: &str =
    "topology,seed,p,variant,t1,makespan,speedup,sslr,utilization,sim_makespan,rel_error,deadlock";

fn run_bench(args: &BenchArgs) -> anyhow::Result<String> {
    let mut rows = Vec::new();
    let topology_name = match args.topology.topology {
        TopologyKind::Chain => "chain",
        TopologyKind::Fft => "fft",
        TopologyKind::Gaussian => "gaussian",
        TopologyKind::Cholesky => "cholesky",
        TopologyKind::OuterProduct => "outer-product",
        TopologyKind::Matmul => "matmul",
        TopologyKind::VectorNorm => "vector-norm",
        TopologyKind::Softmax => "softmax",
    };
    for i in 0..args.graphs {
        let seed = args.seed.wrapping_add(i as u64);
        let graph = build_graph(&args.topology, seed)?;
        for &p in &args.p {
            for &variant in &args.variants {
                let schedule = make_schedule(&graph, p, variant)?;
                let m = compute_metrics(&graph, &schedule)?;
                let (sim, err, deadlock) = match variant.partition_variant() {
                    None => (String::new(), String::new(), String::new()),
                    Some(v) => {
                        let part = make_partition(&graph, p, v)?;
                        let plan = buffer_plan(&graph, &part, &schedule)?;
                        let report = simulate(&graph, &part, &schedule, &plan)?;
                        (
                            report.simulated_makespan.to_string(),
                            report
                                .relative_error
                                .map(|e| format!("{:.6}", q_to_f64(e)))
                                .unwrap_or_default(),
                            report.deadlocked.to_string(),
                        )
                    }
                };
                rows.push(format!(
                    "{topology_name},{seed},{p},{},{},{},{:.6},{:.6},{:.6},{sim},{err},{deadlock}",
                    variant.name(),
                    m.t1,
                    m.makespan,
                    q_to_f64(m.speedup),
                    q_to_f64(m.sslr),
                    q_to_f64(m.pe_utilization),
                ));
            }
        }
    }
    rows.sort();
    let mut out = String::with_capacity(rows.len() * 64 + CSV_HEADER.len() + 1);
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(out)
}

fn emit(path: &Option<PathBuf>, body: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, body.as_bytes())
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", p.display()))?,
        None if body.ends_with('\n') => print!("{body}"),
        None => println!("{body}"),
    }
    Ok(())
}
