//! Command-line front end: analyze a graph, sweep all small graphs, compare
//! Markov equivalence, extend certificates, and test Spearman matrices.
//!
//! Exit codes: 0 when the answer is positive, 3 when it is negative or
//! uncertified, 2 on any input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use latent_ident::criteria::{
    necessary_condition, subgraph_extension, sufficient_odd_cycle, wermuth_clause,
    ExtensionOptions, NecessaryReport, VerdictCache, WermuthClause,
};
use latent_ident::enumerate::{
    classify_all, gap_analysis, ClassifyConfig, GapReport, Table1Counts,
};
use latent_ident::graph::{Component, NodeSet};
use latent_ident::jacobian::{
    build_jacobian, decide_generic_finite, edge_bound_ok_excluding, DecideConfig, Status,
    DEFAULT_SEED, DEFAULT_TRIALS,
};
use latent_ident::maps::DEFAULT_BOUND;
use latent_ident::spearman::{
    cospearman_decompose, is_cospearman, is_spearman, spearman_decompose, SpearmanDecomposition,
};
use latent_ident::{Dag, RatMatrix, UGraph};

const EXIT_NEGATIVE: u8 = 3;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "latent-ident",
    version,
    about = "Generic identifiability of DAG models with one latent source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every criterion and the Jacobian rank test on one graph.
    Analyze(AnalyzeArgs),
    /// Classify all unlabeled DAGs on `m` nodes and write the results.
    Enumerate(EnumerateArgs),
    /// Decide whether two DAGs are Markov equivalent.
    Equiv { first: PathBuf, second: PathBuf },
    /// Search for a subgraph-extension certificate against a verdict cache.
    Extend(ExtendArgs),
    /// Test a symmetric matrix for the Spearman and coSpearman forms.
    Spearman { matrix: PathBuf },
}

#[derive(Args, Clone, Copy)]
struct SamplingArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Half-width of the integer range parameters are drawn from.
    #[arg(long, default_value_t = DEFAULT_BOUND, value_parser = clap::value_parser!(u64).range(2..))]
    bound: u64,
    /// Deficient points to see before reporting non-identifiability.
    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = parse_trials)]
    trials: usize,
}

fn parse_trials(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

impl SamplingArgs {
    fn config(self) -> DecideConfig {
        DecideConfig {
            seed: self.seed,
            bound: self.bound,
            trials: self.trials,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    graph: PathBuf,
    /// Nodes without a latent loading, 1-based and comma separated.
    #[arg(long, value_delimiter = ',')]
    excluded: Vec<usize>,
    /// Write the Jacobian at the witness (or the last point tried).
    #[arg(long, value_name = "FILE")]
    dump_jacobian: Option<PathBuf>,
    /// Write the full-rank parameter point as JSON.
    #[arg(long, value_name = "FILE")]
    dump_witness: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct EnumerateArgs {
    m: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Verdicts for `m − 1` nodes; computed on the fly when absent.
    #[arg(long, value_name = "FILE")]
    lower_cache: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct ExtendArgs {
    graph: PathBuf,
    cache: PathBuf,
    /// Longest removal chain; defaults to `m − 3`.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Only accept cached verdicts, not the odd-cycle condition.
    #[arg(long)]
    no_fallback: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_graph(path: &Path) -> Result<Dag> {
    Dag::parse(&read(path)?).with_context(|| format!("invalid graph file {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn one_based(edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    edges.into_iter().map(|(v, w)| (v + 1, w + 1)).collect()
}

#[derive(Serialize)]
struct VerdictSummary {
    status: Status,
    rank_observed: usize,
    columns: usize,
    trials: usize,
    seed: u64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    excluded: Vec<usize>,
    edge_bound: bool,
    complement: Vec<(usize, usize)>,
    complement_components: Vec<Component>,
    concentration_graph: Vec<(usize, usize)>,
    concentration_complement: Vec<(usize, usize)>,
    latent_cov_graph: Vec<(usize, usize)>,
    latent_cov_complement: Vec<(usize, usize)>,
    sufficient: bool,
    necessary: NecessaryReport,
    wermuth: bool,
    wermuth_clause: Option<WermuthClause>,
    verdict: VerdictSummary,
}

/// Components of `G^c` on the non-excluded nodes, with original 1-based
/// labels.
fn complement_components(g: &Dag, excluded: &NodeSet) -> Vec<Component> {
    let keep: Vec<usize> = (0..g.m()).filter(|v| !excluded.contains(v)).collect();
    let sub: UGraph = g.complement().induced(&keep.iter().copied().collect());
    sub.odd_cycle_components()
        .into_iter()
        .map(|c| Component {
            nodes: c.nodes.iter().map(|&i| keep[i] + 1).collect(),
            odd_cycle: c.odd_cycle,
        })
        .collect()
}

fn analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let g = read_graph(&args.graph)?;
    let mut excluded = NodeSet::new();
    for &v in &args.excluded {
        if v == 0 || v > g.m() {
            bail!("excluded node {v} is outside 1..={}", g.m());
        }
        excluded.insert(v - 1);
    }
    let verdict = decide_generic_finite(&g, &excluded, &args.sampling.config());
    let con = g.concentration_graph();
    let cov = g.latent_cov_graph();
    let clause = wermuth_clause(&g);
    let report = AnalyzeReport {
        nodes: g.m(),
        edges: one_based(g.edges().to_vec()),
        excluded: excluded.iter().map(|v| v + 1).collect(),
        edge_bound: edge_bound_ok_excluding(&g, excluded.len()),
        complement: one_based(g.complement().edges()),
        complement_components: complement_components(&g, &excluded),
        concentration_graph: one_based(con.edges()),
        concentration_complement: one_based(con.complement().edges()),
        latent_cov_graph: one_based(cov.edges()),
        latent_cov_complement: one_based(cov.complement().edges()),
        sufficient: sufficient_odd_cycle(&g, &excluded),
        necessary: necessary_condition(&g, &excluded),
        wermuth: clause.is_some(),
        wermuth_clause: clause,
        verdict: VerdictSummary {
            status: verdict.status,
            rank_observed: verdict.rank_observed,
            columns: verdict.columns,
            trials: verdict.trials,
            seed: verdict.seed,
        },
    };

    if let Some(path) = &args.dump_witness {
        let text = match &verdict.witness {
            Some(w) => serde_json::to_string_pretty(w)?,
            None => "null".to_string(),
        };
        write(path, &(text + "\n"))?;
    }
    if let Some(path) = &args.dump_jacobian {
        let point = match &verdict.witness {
            Some(w) => w.clone(),
            None => latent_ident::maps::random_param_point(
                &g,
                latent_ident::maps::ParamKind::Concentration,
                &excluded,
                args.sampling.seed,
                args.sampling.bound,
            )?,
        };
        write(path, &build_jacobian(&g, &point)?.to_text())?;
    }

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_analysis(&report);
    }
    Ok(if verdict.identifiable() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    })
}

fn pairs(edges: &[(usize, usize)], sep: &str) -> String {
    if edges.is_empty() {
        return "(none)".into();
    }
    edges
        .iter()
        .map(|(v, w)| format!("{v}{sep}{w}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_analysis(r: &AnalyzeReport) {
    let n = &r.necessary;
    println!(
        "nodes={} edges={} edge_bound={}",
        r.nodes,
        r.edges.len(),
        r.edge_bound
    );
    println!("graph: {}", pairs(&r.edges, "->"));
    if !r.excluded.is_empty() {
        println!("excluded: {:?}", r.excluded);
    }
    println!("complement: {}", pairs(&r.complement, "-"));
    println!(
        "concentration graph: {}",
        pairs(&r.concentration_graph, "-")
    );
    println!(
        "concentration complement: {}",
        pairs(&r.concentration_complement, "-")
    );
    println!(
        "latent covariance graph: {}",
        pairs(&r.latent_cov_graph, "-")
    );
    println!(
        "latent covariance complement: {}",
        pairs(&r.latent_cov_complement, "-")
    );
    println!("suff={}", r.sufficient);
    println!(
        "nec={} e_con={} d_con={} cov_edges={} d_cov={} |E|={}",
        n.holds, n.e_con, n.d_con, n.cov_edges, n.d_cov, n.edges
    );
    println!("wermuth={}", r.wermuth);
    println!(
        "verdict={:?} rank={}/{} trials={} seed={}",
        r.verdict.status,
        r.verdict.rank_observed,
        r.verdict.columns,
        r.verdict.trials,
        r.verdict.seed
    );
}

#[derive(Serialize)]
struct Table1File {
    m: usize,
    counts: Table1Counts,
    gap: Option<GapReport>,
}

fn enumerate(args: &EnumerateArgs) -> Result<ExitCode> {
    let config = ClassifyConfig {
        decide: args.sampling.config(),
        workers: args.workers,
    };
    let mut class = classify_all(args.m, &config)?;
    let gap = if args.m > 3 {
        let lower = match &args.lower_cache {
            Some(p) => VerdictCache::from_json(&read(p)?)?,
            None => classify_all(args.m - 1, &config)?.verdict_cache(),
        };
        Some(gap_analysis(&mut class, &lower)?)
    } else {
        None
    };

    fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("cannot create {}", args.output_dir.display()))?;
    let out = |name: String| args.output_dir.join(name);
    let table = Table1File {
        m: args.m,
        counts: class.counts.clone(),
        gap: gap.clone(),
    };
    write(
        &out("table1.json".into()),
        &(serde_json::to_string_pretty(&table)? + "\n"),
    )?;
    let mut csv = Vec::new();
    class.write_csv(&mut csv)?;
    write(
        &out(format!("graphs_m{}.csv", args.m)),
        std::str::from_utf8(&csv)?,
    )?;
    write(
        &out(format!("cache_m{}.json", args.m)),
        &(class.verdict_cache().to_json()? + "\n"),
    )?;

    println!("{}", class.counts.summary_line());
    println!(
        "nonidentifiable={} probable_only={}",
        class.counts.jacobian_nonidentifiable,
        class.counts.probable_only_negatives.len()
    );
    if let Some(g) = &gap {
        println!(
            "gap={} extension_certified={} disagreements={}",
            g.gap_size,
            g.extension_certified,
            g.disagreements.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn equiv(first: &Path, second: &Path) -> Result<ExitCode> {
    let (a, b) = (read_graph(first)?, read_graph(second)?);
    let eq = a.markov_equivalent(&b)?;
    println!("{}", serde_json::json!({ "markov_equivalent": eq }));
    Ok(if eq {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    })
}

fn extend(args: &ExtendArgs) -> Result<ExitCode> {
    let g = read_graph(&args.graph)?;
    let cache = VerdictCache::from_json(&read(&args.cache)?)
        .with_context(|| format!("invalid cache file {}", args.cache.display()))?;
    let opts = ExtensionOptions {
        max_depth: args.max_depth,
        sufficient_fallback: !args.no_fallback,
    };
    let cert = subgraph_extension(&g, &cache, &opts);
    if let Some(c) = &cert {
        c.replay(&g, &cache)?;
    }
    println!("{}", serde_json::to_string_pretty(&cert)?);
    Ok(if cert.is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NEGATIVE)
    })
}

#[derive(Serialize)]
struct Decomposition {
    kind: &'static str,
    #[serde(flatten)]
    parts: SpearmanDecomposition,
}

fn spearman(path: &Path) -> Result<ExitCode> {
    let u = RatMatrix::parse(&read(path)?)
        .with_context(|| format!("invalid matrix file {}", path.display()))?;
    if !u.is_square() || !u.is_symmetric() {
        bail!("matrix must be square and symmetric");
    }
    let (sp, co) = (is_spearman(&u), is_cospearman(&u));
    let decomposition = if sp {
        Some(Decomposition {
            kind: "spearman",
            parts: spearman_decompose(&u)?,
        })
    } else if co {
        Some(Decomposition {
            kind: "cospearman",
            parts: cospearman_decompose(&u)?,
        })
    } else {
        None
    };
    let out = serde_json::json!({
        "is_spearman": sp,
        "is_cospearman": co,
        "decomposition": decomposition,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Equiv { first, second } => equiv(first, second),
        Command::Extend(a) => extend(a),
        Command::Spearman { matrix } => spearman(matrix),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
