//! `geri`: build heterogeneous networks, train embeddings, evaluate them,
//! search walk parameters and time synthetic runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use geri_core::embedding::{read_embeddings, write_embeddings, Format};
use geri_core::eval::{EvalOptions, MultiLabelRule};
use geri_core::synth::synthetic_network;
use geri_core::tune::{grid_search, GridSpec};
use geri_core::walk::{generate_walks, write_walks};
use geri_core::{
    evaluate, train, BiasMode, BiasTables, Error, HeteroNetwork, InfoNetwork, LabelSet, NodeId,
    SplitSpec, TrainConfig, WalkConfig, WalkStarts,
};

#[derive(Parser)]
#[command(name = "geri", version, about = "Graph embedding with text-derived bridge nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the heterogeneous network and write it as an edge list
    Convert(ConvertArgs),
    /// Train embeddings
    Train(TrainArgs),
    /// Score embeddings by node classification
    Evaluate(EvaluateArgs),
    /// Time training on synthetic random graphs
    Benchmark(BenchmarkArgs),
    /// Search walk parameters on a validation split
    Grid(GridArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Edge list ("src dst [weight]") or a network written by `convert`
    #[arg(long)]
    edges: PathBuf,
    /// Node text ("node word value")
    #[arg(long)]
    node_text: Option<PathBuf>,
    /// Edge text ("node_i node_j word value")
    #[arg(long)]
    edge_text: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasModeArg {
    Auto,
    Precomputed,
    OnTheFly,
}

#[derive(Clone, Copy, ValueEnum)]
enum WalkStartsArg {
    All,
    Targets,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long, default_value_t = 150)]
    walk_length: usize,
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Return parameter
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Out-target parameter
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Out-bridge parameter
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Second-step sampling: precomputed tables or rejection sampling
    #[arg(long, value_enum, default_value = "auto")]
    bias_mode: BiasModeArg,
    /// Largest precomputed table size (alias slots) before `auto` falls back to rejection sampling
    #[arg(long, default_value_t = 50_000_000)]
    max_table_entries: usize,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Initial learning rate, decayed linearly to lr * 1e-4
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Step-size multiplier for bridge-centered pairs
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "all")]
    walk_starts: WalkStartsArg,
    /// Train a separate context matrix instead of one vector per node
    #[arg(long)]
    two_matrix: bool,
    /// Ignore node and edge text (topology only)
    #[arg(long)]
    no_text: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Labels ("node label [label...]")
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Inverse regularization strength
    #[arg(long = "C", default_value_t = 100.0)]
    c: f64,
    /// Seed for the splits
    #[arg(long = "split-seed", default_value_t = 0)]
    split_seed: u64,
    /// Multi-label: predict every label scoring at least this probability instead of the top-k
    #[arg(long)]
    threshold: Option<f64>,
    /// Split uniformly instead of per class
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    walk: WalkArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Also write bridge rows, named w<word>
    #[arg(long)]
    emit_bridges: bool,
    /// Write little-endian f32 rows instead of text
    #[arg(long)]
    binary: bool,
    /// Write the walk corpus here, one walk per line
    #[arg(long)]
    dump_walks: Option<PathBuf>,
    /// Embedding file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Embedding file written by `train`
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    /// Per-repeat TSV report (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    walk: WalkArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Parameters to sweep
    #[arg(long, default_value = "p,q,r")]
    grid: String,
    /// Values tried for each swept parameter
    #[arg(long, default_value = "0.25,0.5,1,2,4", value_delimiter = ',')]
    grid_values: Vec<f64>,
    /// Per-configuration TSV (stdout when omitted)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the best configuration's embeddings here
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Graph sizes
    #[arg(long, default_value = "1000,10000,100000", value_delimiter = ',')]
    nodes: Vec<usize>,
    /// Expected degree of the random graphs
    #[arg(long, default_value_t = 10.0)]
    degree: f64,
    /// Timed runs per size
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Refuse sizes above this many nodes
    #[arg(long, default_value_t = 1_000_000)]
    max_nodes: usize,
    #[command(flatten)]
    walk: WalkArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// "n<TAB>seconds" rows (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Exit status 2 for bad input or configuration, 1 for anything else.
enum Failure {
    Usage(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn output_error(path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::Internal(format!("{}: {e}", p.display())),
        None => Failure::Internal(format!("stdout: {e}")),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GERI_LOG", "info"))
        .format_timestamp(None)
        .init();
    let result = std::panic::catch_unwind(|| match cli.command {
        Command::Convert(a) => convert(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Grid(a) => grid(a),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn load_network(input: &InputArgs, no_text: bool) -> Result<HeteroNetwork, Failure> {
    if HeteroNetwork::is_serialized(&input.edges)? {
        if input.node_text.is_some() || input.edge_text.is_some() {
            warn!("{} is already a heterogeneous network; text files ignored", input.edges.display());
        }
        if no_text {
            return Err(Failure::Usage("--no-text needs a raw edge list, not a converted network".into()));
        }
        return Ok(HeteroNetwork::load(&input.edges)?);
    }
    let Some(node_text) = &input.node_text else {
        return Err(Failure::Usage("--node-text is required unless --edges is a converted network".into()));
    };
    let info = InfoNetwork::parse(&input.edges, node_text, input.edge_text.as_deref())?;
    let info = if no_text { info.without_text() } else { info };
    let net = HeteroNetwork::build(&info);
    info!(
        "network: {} targets, {} bridges, {} edges",
        net.target_count(),
        net.bridge_count(),
        net.edge_count()
    );
    Ok(net)
}

fn walk_config(a: &WalkArgs, seed: u64, net: &HeteroNetwork) -> WalkConfig {
    let bias_mode = match a.bias_mode {
        BiasModeArg::Auto => BiasMode::auto(net, a.max_table_entries),
        BiasModeArg::Precomputed => BiasMode::Precomputed,
        BiasModeArg::OnTheFly => BiasMode::OnTheFly,
    };
    WalkConfig {
        p: a.p,
        q: a.q,
        r: a.r,
        walk_length: a.walk_length,
        walks_per_node: a.walks_per_node,
        window: a.window,
        seed,
        bias_mode,
    }
}

fn train_config(a: &ModelArgs) -> TrainConfig {
    TrainConfig {
        dim: a.dim,
        negatives: a.negatives,
        lr: a.lr,
        lambda1: a.lambda1,
        seed: a.seed,
        walk_starts: match a.walk_starts {
            WalkStartsArg::All => WalkStarts::All,
            WalkStartsArg::Targets => WalkStarts::Targets,
        },
        workers: a.workers,
        context_matrix: a.two_matrix,
    }
}

fn split_spec(a: &EvalArgs) -> SplitSpec {
    SplitSpec {
        train_fraction: a.train_fraction,
        repeats: a.repeats,
        seed: a.split_seed,
        stratified: !a.no_stratify,
    }
}

fn eval_options(a: &EvalArgs) -> EvalOptions {
    EvalOptions {
        c: a.c,
        rule: a.threshold.map_or(MultiLabelRule::TopKnown, MultiLabelRule::Threshold),
    }
}

fn validate(wcfg: &WalkConfig, tcfg: &TrainConfig) -> Outcome {
    wcfg.validate()?;
    tcfg.validate()?;
    Ok(())
}

fn convert(a: ConvertArgs) -> Outcome {
    let net = load_network(&a.input, false)?;
    let mut out = open_output(a.output.as_deref())?;
    net.write(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| output_error(a.output.as_deref(), e))
}

fn run_train(a: TrainArgs) -> Outcome {
    let net = load_network(&a.input, a.model.no_text)?;
    let tcfg = train_config(&a.model);
    let wcfg = walk_config(&a.walk, tcfg.seed, &net);
    validate(&wcfg, &tcfg)?;
    let started = Instant::now();
    let bias = BiasTables::new(&net, &wcfg);
    info!("bias tables ({:?}) built in {:.2}s", bias.mode(), started.elapsed().as_secs_f64());
    if let Some(path) = &a.dump_walks {
        let n = match tcfg.walk_starts {
            WalkStarts::All => net.node_count(),
            WalkStarts::Targets => net.target_count(),
        };
        let starts: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
        let walks = generate_walks(&net, &bias, &wcfg, &starts);
        let mut out = open_output(Some(path))?;
        write_walks(&net, &walks, &mut out)
            .and_then(|_| out.flush())
            .map_err(|e| output_error(Some(path), e))?;
    }
    let trained = train(&net, &bias, &wcfg, &tcfg)?;
    let s = &trained.stats;
    info!(
        "trained on {} pairs from {} walks ({} ended early) in {:.2}s",
        s.pairs, s.walks, s.dead_ends, s.seconds
    );
    let format = if a.binary { Format::Binary } else { Format::Text };
    write_embeddings(&a.output, &trained.model.embeddings, &net, a.emit_bridges, format)?;
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Outcome {
    let named = read_embeddings(&a.embeddings)?;
    let (emb, present) = named.targets();
    let labels = LabelSet::parse(&a.eval.labels)?;
    let report = evaluate(&emb, Some(&present), &labels, split_spec(&a.eval), eval_options(&a.eval))?;
    let mut out = open_output(a.output.as_deref())?;
    report
        .write_tsv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| output_error(a.output.as_deref(), e))?;
    drop(out);
    println!("{}", report.summary());
    Ok(())
}

fn grid(a: GridArgs) -> Outcome {
    let net = load_network(&a.input, a.model.no_text)?;
    let tcfg = train_config(&a.model);
    let wcfg = walk_config(&a.walk, tcfg.seed, &net);
    validate(&wcfg, &tcfg)?;
    let spec = GridSpec::parse_params(&a.grid, a.grid_values.clone())?;
    let labels = LabelSet::parse(&a.eval.labels)?;
    let result = grid_search(&net, &labels, &wcfg, &tcfg, split_spec(&a.eval), eval_options(&a.eval), &spec)?;
    let mut out = open_output(a.report.as_deref())?;
    result
        .write_tsv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| output_error(a.report.as_deref(), e))?;
    drop(out);
    let best = result.best_row();
    let line = format!(
        "best p={} q={} r={} micro={:.6} macro={:.6}",
        best.p, best.q, best.r, best.micro_f1, best.macro_f1
    );
    println!("{line}");
    if let Some(path) = &a.output {
        write_embeddings(path, &result.best_embeddings, &net, false, Format::Text)?;
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Outcome {
    if a.repeats < 1 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    if let Some(&n) = a.nodes.iter().find(|&&n| n > a.max_nodes) {
        return Err(Failure::Usage(format!(
            "refusing n={n}: above the --max-nodes limit of {}",
            a.max_nodes
        )));
    }
    if let Some(&n) = a.nodes.iter().find(|&&n| n < 10) {
        return Err(Failure::Usage(format!("benchmark sizes must be at least 10, got {n}")));
    }
    let tcfg = train_config(&a.model);
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "n\tseconds").map_err(|e| output_error(a.output.as_deref(), e))?;
    for &n in &a.nodes {
        let mut total = 0.0;
        for rep in 0..a.repeats {
            let info = synthetic_network(n, a.degree, tcfg.seed.wrapping_add(rep as u64))?;
            let started = Instant::now();
            let net = HeteroNetwork::build(&info);
            let wcfg = walk_config(&a.walk, tcfg.seed, &net);
            validate(&wcfg, &tcfg)?;
            let bias = BiasTables::new(&net, &wcfg);
            train(&net, &bias, &wcfg, &tcfg)?;
            let seconds = started.elapsed().as_secs_f64();
            info!("n={n} repeat {rep}: {seconds:.2}s ({:?})", bias.mode());
            total += seconds;
        }
        writeln!(out, "{n}\t{:.4}", total / a.repeats as f64)
            .and_then(|_| out.flush())
            .map_err(|e| output_error(a.output.as_deref(), e))?;
    }
    Ok(())
}
