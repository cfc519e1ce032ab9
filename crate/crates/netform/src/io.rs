//! Line-oriented instance and configuration files, plus the CSV and trace
//! emission used by the CLI. Formats are UTF-8 with `#` comments.
//!
//! Instance files:
//!
//! ```text
//! nodes <n>
//! pi <value>                      # default 1
//! beta <value|auto>               # default auto
//! cost <i> <c_i>                  # default 1
//! traffic <i> <j> <t_ij>
//! contracting default q_p=2 q_n=1
//! contracting constant v=2
//! threshold <C>                   # optional, written by `reduce`
//! query-node <i>                  # optional, best-response instances
//! edge <i> <j>                    # optional embedded start configuration
//! arc <i> <j> <p_ij>
//! ```
//!
//! Topology/configuration files carry `edge` lines and optional `arc`
//! lines. When no arcs are given, each edge gets the canonical arc from its
//! smaller endpoint with the payment set to the current contracting value.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::contracting::{ConstantRule, ContractingRule, DefaultRule};
use crate::dynamics::{RunOutcome, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{
    Beta, Configuration, ContractGraph, GameSetting, NodeId, PaymentMatrix, Topology,
    TrafficMatrix,
};

/// A parsed instance file.
#[derive(Clone, Debug)]
pub struct Instance {
    pub setting: GameSetting,
    /// Embedded start configuration, when the file carries `edge`/`arc`
    /// lines.
    pub start: Option<Configuration>,
    pub threshold: Option<f64>,
    pub query_node: Option<NodeId>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("expected a number, got `{token}`")))
}

fn parse_usize(line: usize, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("expected a nonnegative integer, got `{token}`")))
}

fn parse_node(line: usize, token: &str, n: usize) -> Result<NodeId> {
    let id = parse_usize(line, token)?;
    if id >= n {
        return Err(parse_err(line, format!("node {id} out of range for {n} nodes")));
    }
    Ok(NodeId(id as u32))
}

fn parse_kv(line: usize, token: &str, key: &str) -> Result<f64> {
    match token.split_once('=') {
        Some((k, v)) if k == key => parse_f64(line, v),
        _ => Err(parse_err(line, format!("expected `{key}=<value>`, got `{token}`"))),
    }
}

fn parse_rule(line: usize, tokens: &[&str]) -> Result<Arc<dyn ContractingRule>> {
    match tokens {
        ["default", rest @ ..] => {
            let mut q_p = 2.0;
            let mut q_n = 1.0;
            for tok in rest {
                if tok.starts_with("q_p=") {
                    q_p = parse_kv(line, tok, "q_p")?;
                } else if tok.starts_with("q_n=") {
                    q_n = parse_kv(line, tok, "q_n")?;
                } else {
                    return Err(parse_err(line, format!("unknown parameter `{tok}`")));
                }
            }
            Ok(Arc::new(DefaultRule::new(q_p, q_n).map_err(|e| {
                parse_err(line, e.to_string())
            })?))
        }
        ["constant", rest @ ..] => {
            let mut v = 2.0;
            for tok in rest {
                if tok.starts_with("v=") {
                    v = parse_kv(line, tok, "v")?;
                } else {
                    return Err(parse_err(line, format!("unknown parameter `{tok}`")));
                }
            }
            Ok(Arc::new(ConstantRule::new(v)))
        }
        [name, ..] => Err(parse_err(line, format!("unknown contracting rule `{name}`"))),
        [] => Err(parse_err(line, "missing contracting rule name")),
    }
}

struct Lines<'a> {
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn tokenize(text: &str) -> Lines<'_> {
    let rows = text
        .lines()
        .enumerate()
        .filter_map(|(idx, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.is_empty() {
                None
            } else {
                Some((idx + 1, tokens))
            }
        })
        .collect();
    Lines { rows }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let lines = tokenize(text);
    let mut n: Option<usize> = None;
    let mut pi = 1.0;
    let mut beta = Beta::Auto;
    let mut costs: Vec<f64> = Vec::new();
    let mut traffic: Option<TrafficMatrix> = None;
    let mut rule: Arc<dyn ContractingRule> = Arc::new(DefaultRule::default());
    let mut threshold = None;
    let mut query_node = None;
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut arcs: Vec<(NodeId, NodeId, f64)> = Vec::new();

    for (line, tokens) in &lines.rows {
        let line = *line;
        let require_n = |what: &str| {
            n.ok_or_else(|| parse_err(line, format!("`{what}` before `nodes`")))
        };
        match tokens[0] {
            "nodes" => {
                if n.is_some() {
                    return Err(parse_err(line, "duplicate `nodes` line"));
                }
                if tokens.len() != 2 {
                    return Err(parse_err(line, "usage: nodes <n>"));
                }
                let count = parse_usize(line, tokens[1])?;
                n = Some(count);
                costs = vec![1.0; count];
                traffic = Some(TrafficMatrix::new(count));
            }
            "pi" => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "usage: pi <value>"));
                }
                pi = parse_f64(line, tokens[1])?;
            }
            "beta" => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "usage: beta <value|auto>"));
                }
                beta = if tokens[1] == "auto" {
                    Beta::Auto
                } else {
                    Beta::Value(parse_f64(line, tokens[1])?)
                };
            }
            "cost" => {
                let count = require_n("cost")?;
                if tokens.len() != 3 {
                    return Err(parse_err(line, "usage: cost <i> <c_i>"));
                }
                let node = parse_node(line, tokens[1], count)?;
                costs[node.index()] = parse_f64(line, tokens[2])?;
            }
            "traffic" => {
                let count = require_n("traffic")?;
                if tokens.len() != 4 {
                    return Err(parse_err(line, "usage: traffic <i> <j> <t_ij>"));
                }
                let i = parse_node(line, tokens[1], count)?;
                let j = parse_node(line, tokens[2], count)?;
                let value = parse_f64(line, tokens[3])?;
                traffic
                    .as_mut()
                    .unwrap()
                    .set(i, j, value)
                    .map_err(|e| parse_err(line, e.to_string()))?;
            }
            "contracting" => {
                rule = parse_rule(line, &tokens[1..])?;
            }
            "threshold" => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "usage: threshold <C>"));
                }
                threshold = Some(parse_f64(line, tokens[1])?);
            }
            "query-node" => {
                let count = require_n("query-node")?;
                if tokens.len() != 2 {
                    return Err(parse_err(line, "usage: query-node <i>"));
                }
                query_node = Some(parse_node(line, tokens[1], count)?);
            }
            "edge" => {
                let count = require_n("edge")?;
                if tokens.len() != 3 {
                    return Err(parse_err(line, "usage: edge <i> <j>"));
                }
                edges.push((
                    parse_node(line, tokens[1], count)?,
                    parse_node(line, tokens[2], count)?,
                ));
            }
            "arc" => {
                let count = require_n("arc")?;
                if tokens.len() != 4 {
                    return Err(parse_err(line, "usage: arc <i> <j> <p_ij>"));
                }
                arcs.push((
                    parse_node(line, tokens[1], count)?,
                    parse_node(line, tokens[2], count)?,
                    parse_f64(line, tokens[3])?,
                ));
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }

    let n = n.ok_or_else(|| parse_err(0, "missing `nodes` line"))?;
    let traffic = traffic.unwrap();
    let setting = GameSetting::new(pi, costs, traffic, rule, beta)?;
    let start = if edges.is_empty() && arcs.is_empty() {
        None
    } else {
        Some(assemble_configuration(n, &edges, &arcs, &setting)?)
    };
    Ok(Instance {
        setting,
        start,
        threshold,
        query_node,
    })
}

fn assemble_configuration(
    n: usize,
    edges: &[(NodeId, NodeId)],
    arcs: &[(NodeId, NodeId, f64)],
    setting: &GameSetting,
) -> Result<Configuration> {
    let topology = Topology::with_edges(n, edges.iter().copied())?;
    if arcs.is_empty() {
        return Configuration::canonical(topology, setting);
    }
    let mut contracts = ContractGraph::new();
    let mut payments = PaymentMatrix::new();
    for &(i, j, p) in arcs {
        contracts.insert(i, j)?;
        payments.set(i, j, p);
    }
    Configuration::from_parts(topology, contracts, payments)
}

/// Parses a standalone topology file (`edge` lines; a `nodes` line must
/// match the instance).
pub fn parse_topology(text: &str, n: usize) -> Result<Topology> {
    let lines = tokenize(text);
    let mut g = Topology::new(n);
    for (line, tokens) in &lines.rows {
        let line = *line;
        match tokens[0] {
            "nodes" => {
                let stated = parse_usize(line, tokens[1])?;
                if stated != n {
                    return Err(parse_err(
                        line,
                        format!("file says {stated} nodes, instance has {n}"),
                    ));
                }
            }
            "edge" => {
                if tokens.len() != 3 {
                    return Err(parse_err(line, "usage: edge <i> <j>"));
                }
                g.add_edge(
                    parse_node(line, tokens[1], n)?,
                    parse_node(line, tokens[2], n)?,
                )
                .map_err(|e| parse_err(line, e.to_string()))?;
            }
            "arc" => {} // tolerated so configuration files also parse as topologies
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    Ok(g)
}

/// Parses a configuration file against a setting. Files without `arc` lines
/// get the canonical contracts and updated payments.
pub fn parse_configuration(text: &str, setting: &GameSetting) -> Result<Configuration> {
    let n = setting.node_count();
    let lines = tokenize(text);
    let mut edges = Vec::new();
    let mut arcs = Vec::new();
    for (line, tokens) in &lines.rows {
        let line = *line;
        match tokens[0] {
            "nodes" => {
                let stated = parse_usize(line, tokens[1])?;
                if stated != n {
                    return Err(parse_err(
                        line,
                        format!("file says {stated} nodes, instance has {n}"),
                    ));
                }
            }
            "edge" => {
                if tokens.len() != 3 {
                    return Err(parse_err(line, "usage: edge <i> <j>"));
                }
                edges.push((
                    parse_node(line, tokens[1], n)?,
                    parse_node(line, tokens[2], n)?,
                ));
            }
            "arc" => {
                if tokens.len() != 4 {
                    return Err(parse_err(line, "usage: arc <i> <j> <p_ij>"));
                }
                arcs.push((
                    parse_node(line, tokens[1], n)?,
                    parse_node(line, tokens[2], n)?,
                    parse_f64(line, tokens[3])?,
                ));
            }
            other => return Err(parse_err(line, format!("unknown directive `{other}`"))),
        }
    }
    assemble_configuration(n, &edges, &arcs, setting)
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn load_topology(path: &Path, n: usize) -> Result<Topology> {
    parse_topology(&fs::read_to_string(path)?, n)
}

pub fn load_configuration(path: &Path, setting: &GameSetting) -> Result<Configuration> {
    parse_configuration(&fs::read_to_string(path)?, setting)
}

/// Renders an instance file that parses back to the same setting. `Auto`
/// betas are written as `auto`.
pub fn render_instance(
    setting: &GameSetting,
    beta_auto: bool,
    start: Option<&Configuration>,
    threshold: Option<f64>,
    query_node: Option<NodeId>,
) -> String {
    let mut out = String::new();
    let n = setting.node_count();
    out.push_str(&format!("nodes {n}\n"));
    out.push_str(&format!("pi {}\n", setting.pi()));
    if beta_auto {
        out.push_str("beta auto\n");
    } else {
        out.push_str(&format!("beta {}\n", setting.beta()));
    }
    out.push_str(&format!("contracting {}\n", setting.rule().spec()));
    for i in 0..n {
        let c = setting.routing_cost(NodeId(i as u32));
        if c != 1.0 {
            out.push_str(&format!("cost {i} {c}\n"));
        }
    }
    for (i, j, t) in setting.traffic().demands() {
        out.push_str(&format!("traffic {i} {j} {t}\n"));
    }
    if let Some(c) = threshold {
        out.push_str(&format!("threshold {c}\n"));
    }
    if let Some(u) = query_node {
        out.push_str(&format!("query-node {u}\n"));
    }
    if let Some(config) = start {
        out.push_str(&render_configuration_body(config));
    }
    out
}

fn render_configuration_body(config: &Configuration) -> String {
    let mut out = String::new();
    for (i, j) in config.topology.edges() {
        out.push_str(&format!("edge {i} {j}\n"));
    }
    for (i, j) in config.contracts.arcs() {
        out.push_str(&format!("arc {i} {j} {}\n", config.payments.get(i, j)));
    }
    out
}

/// Renders a standalone configuration file.
pub fn render_configuration(config: &Configuration) -> String {
    format!(
        "nodes {}\n{}",
        config.node_count(),
        render_configuration_body(config)
    )
}

pub const SUMMARY_HEADER: &str = "trial,rounds,converged,final_sc,c_f,c_e,a_e,a_p";

/// One summary CSV row per trial.
pub fn summary_row(trial: usize, outcome: &RunOutcome) -> String {
    let d = outcome.final_degree;
    format!(
        "{trial},{},{},{},{},{},{},{}",
        outcome.rounds,
        outcome.converged,
        outcome.final_social_cost,
        d.c_f,
        d.c_e,
        d.a_e,
        d.a_p
    )
}

/// Line-delimited JSON, one record per round.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_a_reduction_instance() {
        let k3 = crate::graphs::topology_from_mask(3, 0b111);
        let br = crate::reductions::reduce_is_to_br(&k3, 2).unwrap();
        let text = render_instance(
            &br.setting,
            true,
            Some(&br.config),
            Some(br.threshold),
            Some(br.node),
        );
        let parsed = parse_instance(&text).unwrap();
        assert_eq!(parsed.setting.pi(), br.setting.pi());
        assert_eq!(parsed.setting.beta(), br.setting.beta());
        assert_eq!(parsed.setting.traffic(), br.setting.traffic());
        assert_eq!(parsed.start.as_ref(), Some(&br.config));
        assert_eq!(parsed.threshold, Some(2.0));
        assert_eq!(parsed.query_node, Some(NodeId(3)));
    }

    #[test]
    fn comments_and_defaults() {
        let text = "# demo\nnodes 3\ntraffic 0 1 2 # heavy\n";
        let parsed = parse_instance(text).unwrap();
        assert_eq!(parsed.setting.pi(), 1.0);
        assert_eq!(parsed.setting.traffic().get(NodeId(0), NodeId(1)), 2.0);
        assert!(parsed.start.is_none());
    }

    #[test]
    fn rejects_unknown_directives_and_bad_nodes() {
        assert!(parse_instance("nodes 2\nfrobnicate 1\n").is_err());
        assert!(parse_instance("nodes 2\ntraffic 0 5 1\n").is_err());
        assert!(parse_instance("traffic 0 1 1\n").is_err());
    }

    #[test]
    fn topology_without_arcs_gets_canonical_contracts() {
        let mut t = TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = crate::gen::uniform_setting(t).unwrap();
        let config = parse_configuration("edge 0 1\nedge 1 2\n", &setting).unwrap();
        config.validate().unwrap();
        assert!(config.contracts.contains(NodeId(0), NodeId(1)));
        assert_eq!(config.payments.get(NodeId(0), NodeId(1)), 2.0);
        assert_eq!(config.payments.get(NodeId(1), NodeId(2)), 1.0);
    }
}
