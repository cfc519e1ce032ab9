//! Command-line front end: simulation, stability checks, welfare analysis,
//! exact best response, reduction generators, and convergence studies. All
//! randomness flows from `--seed`, so identical inputs give byte-identical
//! outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use netform::best_response::{best_response_value, BRInstance};
use netform::dynamics::{run, ActivationProcess, RunOptions, TraceRecord};
use netform::error::Error;
use netform::io::{
    self, load_configuration, load_instance, load_topology, render_instance, Instance,
    SUMMARY_HEADER,
};
use netform::model::{Configuration, NodeId, Topology};
use netform::reductions::{
    reduce_is_to_br, reduce_rx3c_to_lsc, reduce_rx3c_to_lsce, reduce_x3c_to_rx3c, RX3CInstance,
    X3CInstance,
};
use netform::stability::{degree_of, is_nash, is_pairwise_stable, is_pne_topology, is_sink};
use netform::welfare::{
    decide_lower_sc_bounded, decide_lower_sc_equilibrium_bounded, optimal_topology_bounded,
    pos_poa_bounded, price, social_cost,
};
use netform::{gen, Result};

#[derive(Parser)]
#[command(
    name = "netform",
    about = "Network formation over heterogeneous traffic: simulate, check, analyze, reduce"
)]
struct Cli {
    /// Worker threads (default: NETFORM_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the restricted myopic dynamics.
    Simulate(SimulateArgs),
    /// Print stability verdicts and the degree tuple of a configuration.
    Check(CheckArgs),
    /// Welfare report: optimum, PoS/PoA, LOWER SC decisions.
    Analyze(AnalyzeArgs),
    /// Exact (exponential) best response for one node.
    BestResponse(BestResponseArgs),
    /// Generate hardness-reduction instances.
    Reduce(ReduceArgs),
    /// Convergence-rate study across sizes and traffic patterns.
    ConvergenceStudy(ConvergenceStudyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// `empty`, `file` (instance-embedded), or a configuration file path.
    #[arg(long, default_value = "empty")]
    start: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_rounds: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one JSONL record per round to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include per-node utilities in trace records.
    #[arg(long)]
    utilities: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Topology or configuration file; defaults to the instance-embedded
    /// configuration.
    #[arg(long)]
    topology: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Enumerate pairwise-Nash topologies and report PoS/PoA.
    #[arg(long)]
    poa: bool,
    /// Decide whether any topology has social cost at most C.
    #[arg(long, value_name = "C")]
    lower_sc: Option<f64>,
    /// Decide whether any pairwise-Nash topology has social cost at most C.
    #[arg(long, value_name = "C")]
    lower_sce: Option<f64>,
    /// Price this topology against the optimum.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Node cap for the exhaustive scans.
    #[arg(long, default_value_t = netform::welfare::DEFAULT_ENUM_BOUND)]
    max_enum_nodes: usize,
    /// Also append the report as one CSV row to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BestResponseArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Configuration file; defaults to the instance-embedded one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to the instance's `query-node`.
    #[arg(long)]
    node: Option<u32>,
    /// Defaults to the instance's `threshold`, if present.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(subcommand)]
    which: ReduceCommand,
}

#[derive(Subcommand)]
enum ReduceCommand {
    /// INDEPENDENT SET (edge lines + threshold) -> BEST RESPONSE instance.
    IsToBr {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Overrides the input file's threshold line.
        #[arg(long)]
        threshold: Option<usize>,
    },
    /// EXACT 3-COVER -> restricted EXACT 3-COVER.
    X3cToRx3c {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Restricted EXACT 3-COVER -> LOWER SC EQUILIBRIUM instance.
    Rx3cToLsce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Restricted EXACT 3-COVER -> LOWER SC instance.
    Rx3cToLsc {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ConvergenceStudyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 6, 8, 10, 12])]
    sizes: Vec<usize>,
    /// Comma-separated: all-to-all, random-tree, random.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["all-to-all".to_string(), "random-tree".to_string()])]
    patterns: Vec<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round cap; defaults to 10 n^4 ln n per size.
    #[arg(long)]
    max_rounds: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads.or_else(|| {
        std::env::var("NETFORM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    }) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Check(args) => cmd_check(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::BestResponse(args) => cmd_best_response(&args),
        Command::Reduce(args) => cmd_reduce(&args),
        Command::ConvergenceStudy(args) => cmd_convergence_study(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn start_configuration(instance: &Instance, start: &str) -> Result<Configuration> {
    match start {
        "empty" => Ok(Configuration::empty(instance.setting.node_count())),
        "file" => instance.start.clone().ok_or_else(|| {
            Error::MalformedInstance("--start file needs an embedded configuration".into())
        }),
        path => load_configuration(Path::new(path), &instance.setting),
    }
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    trial: usize,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let start = start_configuration(&instance, &args.start)?;
    let setting = &instance.setting;
    let n = setting.node_count();
    let record_trace = args.trace.is_some();
    let outcomes: Vec<_> = (0..args.trials)
        .into_par_iter()
        .map(|trial| {
            let mut activation = ActivationProcess::uniform(n, trial_seed(args.seed, trial));
            let options = RunOptions {
                max_rounds: args.max_rounds,
                record_trace,
                record_utilities: args.utilities,
                ..Default::default()
            };
            run(start.clone(), setting, &mut activation, &options)
        })
        .collect::<Result<Vec<_>>>()?;

    println!("{SUMMARY_HEADER}");
    for (trial, outcome) in outcomes.iter().enumerate() {
        println!("{}", io::summary_row(trial, outcome));
    }
    if let Some(path) = &args.trace {
        let mut text = String::new();
        for (trial, outcome) in outcomes.iter().enumerate() {
            for record in &outcome.trace {
                let row = TrialRecord { trial, record };
                text.push_str(&serde_json::to_string(&row).expect("record serializes"));
                text.push('\n');
            }
        }
        fs::write(path, text)?;
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let setting = &instance.setting;
    let config = match &args.topology {
        Some(path) => load_configuration(path, setting)?,
        None => instance.start.clone().ok_or_else(|| {
            Error::MalformedInstance("no --topology given and none embedded in the instance".into())
        })?,
    };

    let report = is_pne_topology(&config.topology, setting.traffic());
    if report.is_pne() {
        println!("pne_topology: yes");
    } else {
        let reasons: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        println!("pne_topology: no ({})", reasons.join("; "));
    }

    let (stable, witness) = is_pairwise_stable(&config, setting);
    match witness {
        None => println!("pairwise_stable: yes"),
        Some(w) => println!("pairwise_stable: no ({w:?})"),
    }
    let nash_witness = is_nash(&config, setting)?;
    match &nash_witness {
        None => println!("nash: yes"),
        Some(w) => println!(
            "nash: no (node {} gains {} breaking {})",
            w.node,
            w.gain,
            w.arcs
                .iter()
                .map(|(a, b)| format!("({a},{b})"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
    println!(
        "pairwise_nash: {}",
        if stable && nash_witness.is_none() {
            "yes"
        } else {
            "no"
        }
    );
    println!(
        "sink: {}",
        if is_sink(&config, setting) { "yes" } else { "no" }
    );
    println!("degree: {}", degree_of(&config, setting));
    println!("social_cost: {}", social_cost(setting, &config.topology));
    Ok(())
}

fn format_topology(g: &Topology) -> String {
    if g.edge_count() == 0 {
        return "(empty)".into();
    }
    g.edges()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let setting = &instance.setting;
    let bound = args.max_enum_nodes;
    let mut text = String::new();
    let mut csv_header = vec!["nodes".to_string()];
    let mut csv_row = vec![setting.node_count().to_string()];
    writeln!(text, "nodes: {}", setting.node_count()).unwrap();

    let need_opt = args.poa || args.topology.is_some();
    let mut sc_opt = None;
    if need_opt {
        let (opt, sc) = optimal_topology_bounded(setting, bound)?;
        writeln!(text, "sc_opt: {sc}").unwrap();
        writeln!(text, "optimal: {}", format_topology(&opt)).unwrap();
        csv_header.push("sc_opt".into());
        csv_row.push(sc.to_string());
        sc_opt = Some(sc);
    }
    if args.poa {
        let report = pos_poa_bounded(setting, bound)?;
        writeln!(text, "pne_count: {}", report.pne_count).unwrap();
        writeln!(text, "pos: {}", report.pos).unwrap();
        writeln!(text, "pos_topology: {}", format_topology(&report.best_pne)).unwrap();
        writeln!(text, "poa: {}", report.poa).unwrap();
        writeln!(text, "poa_topology: {}", format_topology(&report.worst_pne)).unwrap();
        csv_header.extend(["pne_count".into(), "pos".into(), "poa".into()]);
        csv_row.extend([
            report.pne_count.to_string(),
            report.pos.to_string(),
            report.poa.to_string(),
        ]);
    }
    if let Some(c) = args.lower_sc {
        let witness = decide_lower_sc_bounded(setting, c, bound)?;
        match &witness {
            Some(g) => writeln!(text, "lower_sc {c}: yes ({})", format_topology(g)).unwrap(),
            None => writeln!(text, "lower_sc {c}: no").unwrap(),
        }
        csv_header.push("lower_sc".into());
        csv_row.push(witness.is_some().to_string());
    }
    if let Some(c) = args.lower_sce {
        let witness = decide_lower_sc_equilibrium_bounded(setting, c, bound)?;
        match &witness {
            Some(g) => writeln!(text, "lower_sce {c}: yes ({})", format_topology(g)).unwrap(),
            None => writeln!(text, "lower_sce {c}: no").unwrap(),
        }
        csv_header.push("lower_sce".into());
        csv_row.push(witness.is_some().to_string());
    }
    if let Some(path) = &args.topology {
        let g = load_topology(path, setting.node_count())?;
        let sc = social_cost(setting, &g);
        writeln!(text, "topology_sc: {sc}").unwrap();
        let p = price(sc, sc_opt.expect("computed above"));
        writeln!(text, "topology_price: {p}").unwrap();
        csv_header.extend(["topology_sc".into(), "topology_price".into()]);
        csv_row.extend([sc.to_string(), p.to_string()]);
    }

    print!("{text}");
    if let Some(path) = &args.csv {
        fs::write(path, format!("{}\n{}\n", csv_header.join(","), csv_row.join(",")))?;
    }
    Ok(())
}

fn cmd_best_response(args: &BestResponseArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let setting = instance.setting.clone();
    let config = match &args.config {
        Some(path) => load_configuration(path, &setting)?,
        None => instance.start.clone().ok_or_else(|| {
            Error::MalformedInstance("no --config given and none embedded in the instance".into())
        })?,
    };
    let node = match args.node {
        Some(id) => NodeId(id),
        None => instance.query_node.ok_or_else(|| {
            Error::MalformedInstance("no --node given and no query-node in the instance".into())
        })?,
    };
    let threshold = args.threshold.or(instance.threshold);

    let current = setting.utility(&config, node);
    let (value, witness) = best_response_value(&setting, &config, node)?;
    println!("node: {node}");
    println!("current_utility: {current}");
    println!("best_response_value: {value}");
    let breaks = if witness.is_empty() {
        "(none)".to_string()
    } else {
        witness
            .iter()
            .map(|(a, b)| format!("({a},{b})"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("witness_breaks: {breaks}");
    if let Some(c) = threshold {
        let decision = netform::best_response::decide_br(&BRInstance {
            setting,
            config,
            node,
            threshold: c,
        })?;
        println!("threshold: {c}");
        println!("decision: {}", if decision { "yes" } else { "no" });
    }
    Ok(())
}

/// An INDEPENDENT SET file: `nodes`, `edge` lines, optional `threshold`.
fn load_is_instance(path: &Path) -> Result<(Topology, Option<usize>)> {
    let text = fs::read_to_string(path)?;
    let mut n = None;
    let mut edges = Vec::new();
    let mut threshold = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "nodes" => n = Some(parse_count(line, tokens.get(1))?),
            "edge" => {
                if tokens.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: "usage: edge <i> <j>".into(),
                    });
                }
                edges.push((parse_count(line, tokens.get(1))?, parse_count(line, tokens.get(2))?));
            }
            "threshold" => threshold = Some(parse_count(line, tokens.get(1))?),
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown directive `{other}`"),
                })
            }
        }
    }
    let n = n.ok_or(Error::Parse {
        line: 0,
        msg: "missing `nodes` line".into(),
    })?;
    let topology = Topology::with_edges(
        n,
        edges
            .into_iter()
            .map(|(a, b)| (NodeId(a as u32), NodeId(b as u32))),
    )?;
    Ok((topology, threshold))
}

fn parse_count(line: usize, token: Option<&&str>) -> Result<usize> {
    token
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or(Error::Parse {
            line,
            msg: "expected a nonnegative integer".into(),
        })
}

/// An X3C file: `terminal x` and `triple a b c` lines. Terminal labels are
/// reindexed densely in sorted order.
fn load_x3c_instance(path: &Path) -> Result<X3CInstance> {
    let text = fs::read_to_string(path)?;
    let mut terminals = Vec::new();
    let mut triples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "terminal" => terminals.push(parse_count(line, tokens.get(1))?),
            "triple" => {
                if tokens.len() != 4 {
                    return Err(Error::Parse {
                        line,
                        msg: "usage: triple <a> <b> <c>".into(),
                    });
                }
                triples.push([
                    parse_count(line, tokens.get(1))?,
                    parse_count(line, tokens.get(2))?,
                    parse_count(line, tokens.get(3))?,
                ]);
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown directive `{other}`"),
                })
            }
        }
    }
    terminals.sort_unstable();
    terminals.dedup();
    let index_of = |label: usize, line: usize| -> Result<usize> {
        terminals.binary_search(&label).map_err(|_| Error::Parse {
            line: line.min(1),
            msg: format!("triple references undeclared terminal {label}"),
        })
    };
    let triples = triples
        .into_iter()
        .map(|t| Ok([index_of(t[0], 1)?, index_of(t[1], 1)?, index_of(t[2], 1)?]))
        .collect::<Result<Vec<_>>>()?;
    X3CInstance::new(terminals.len(), triples)
}

fn render_x3c(instance: &X3CInstance) -> String {
    let mut out = String::new();
    for x in 0..instance.terminal_count() {
        writeln!(out, "terminal {x}").unwrap();
    }
    for t in instance.triples() {
        writeln!(out, "triple {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    out
}

fn cmd_reduce(args: &ReduceArgs) -> Result<()> {
    match &args.which {
        ReduceCommand::IsToBr {
            input,
            output,
            threshold,
        } => {
            let (graph, file_threshold) = load_is_instance(input)?;
            let c = threshold.or(file_threshold).ok_or_else(|| {
                Error::MalformedInstance(
                    "no threshold: add a `threshold` line or pass --threshold".into(),
                )
            })?;
            let br = reduce_is_to_br(&graph, c)?;
            let text = render_instance(
                &br.setting,
                true,
                Some(&br.config),
                Some(br.threshold),
                Some(br.node),
            );
            fs::write(output, text)?;
            println!(
                "best-response instance: {} nodes, query node {}, threshold {}",
                br.setting.node_count(),
                br.node,
                br.threshold
            );
        }
        ReduceCommand::X3cToRx3c { input, output } => {
            let x3c = load_x3c_instance(input)?;
            let rx3c = reduce_x3c_to_rx3c(&x3c);
            fs::write(output, render_x3c(rx3c.as_x3c()))?;
            println!(
                "rx3c instance: {} terminals, {} triples",
                rx3c.terminal_count(),
                rx3c.triples().len()
            );
        }
        ReduceCommand::Rx3cToLsce { input, output } => {
            let rx3c = RX3CInstance::new(load_x3c_instance(input)?)?;
            let (setting, c) = reduce_rx3c_to_lsce(&rx3c)?;
            fs::write(output, render_instance(&setting, true, None, Some(c), None))?;
            println!(
                "lower-sc-equilibrium instance: {} nodes, threshold {c}",
                setting.node_count()
            );
        }
        ReduceCommand::Rx3cToLsc { input, output } => {
            let rx3c = RX3CInstance::new(load_x3c_instance(input)?)?;
            let (setting, c) = reduce_rx3c_to_lsc(&rx3c)?;
            fs::write(output, render_instance(&setting, true, None, Some(c), None))?;
            println!(
                "lower-sc instance: {} nodes, threshold {c}",
                setting.node_count()
            );
        }
    }
    Ok(())
}

fn pattern_traffic(
    pattern: &str,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<netform::TrafficMatrix> {
    match pattern {
        "all-to-all" => Ok(gen::all_to_all_traffic(n, 1.0)),
        "random-tree" => Ok(gen::tree_traffic(n, rng)),
        "random" => Ok(gen::random_traffic(n, 0.5, 3, rng)),
        other => Err(Error::MalformedInstance(format!(
            "unknown pattern `{other}` (expected all-to-all, random-tree, random)"
        ))),
    }
}

fn cmd_convergence_study(args: &ConvergenceStudyArgs) -> Result<()> {
    use rand::SeedableRng;
    println!("n,pattern,trial,rounds,converged,ratio");
    let mut jobs = Vec::new();
    for &n in &args.sizes {
        for pattern in &args.patterns {
            for trial in 0..args.trials {
                jobs.push((n, pattern.clone(), trial));
            }
        }
    }
    let rows: Vec<String> = jobs
        .into_par_iter()
        .map(|(n, pattern, trial)| -> Result<String> {
            let scale = (n as f64).powi(4) * (n as f64).ln().max(1.0);
            let cap = args
                .max_rounds
                .unwrap_or_else(|| (10.0 * scale).ceil() as usize);
            let seed = trial_seed(args.seed, trial)
                ^ (n as u64) << 32
                ^ pattern.len() as u64;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let traffic = pattern_traffic(&pattern, n, &mut rng)?;
            let setting = gen::uniform_setting(traffic)?;
            let mut activation = ActivationProcess::uniform(n, seed ^ 0xA5A5_A5A5);
            let outcome = run(
                Configuration::empty(n),
                &setting,
                &mut activation,
                &RunOptions {
                    max_rounds: cap,
                    ..Default::default()
                },
            )?;
            let ratio = outcome.rounds as f64 / scale;
            Ok(format!(
                "{n},{pattern},{trial},{},{},{ratio}",
                outcome.rounds, outcome.converged
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows {
        println!("{row}");
    }
    Ok(())
}
