//! Core domain types of the formation game: traffic, topology, contracts,
//! payments, the game setting, and single-deviation semantics.
//!
//! All types are value-semantic and immutable after construction; the
//! operations here are pure functions, safe to evaluate concurrently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contracting::ContractingRule;
use crate::error::{Error, Result};
use crate::routing;

/// Absolute tolerance for utility comparisons: a gain counts as strict
/// improvement only when it exceeds this.
pub const UTILITY_EPS: f64 = 1e-9;

/// `a > b` beyond the utility tolerance.
#[inline]
pub fn strictly_greater(a: f64, b: f64) -> bool {
    a - b > UTILITY_EPS
}

/// A player. Ids are dense in `[0, n)`; the total order breaks ties
/// deterministically everywhere.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_node(i: NodeId, n: usize) -> Result<()> {
    if i.index() >= n {
        return Err(Error::NodeOutOfRange { node: i.0, n });
    }
    Ok(())
}

/// Nonnegative demand `t_ij` between ordered node pairs. Absent entries are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    demands: BTreeMap<(NodeId, NodeId), f64>,
}

impl TrafficMatrix {
    pub fn new(n: usize) -> Self {
        TrafficMatrix {
            n,
            demands: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Sets `t_ij`. Zero removes the entry; negative values and self-demands
    /// are rejected.
    pub fn set(&mut self, i: NodeId, j: NodeId, t: f64) -> Result<()> {
        check_node(i, self.n)?;
        check_node(j, self.n)?;
        if i == j {
            return Err(Error::SelfLoop(i.0));
        }
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTraffic {
                i: i.0,
                j: j.0,
                value: t,
            });
        }
        if t == 0.0 {
            self.demands.remove(&(i, j));
        } else {
            self.demands.insert((i, j), t);
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.demands.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Ordered pairs with positive demand.
    pub fn demands(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.demands.iter().map(|(&(i, j), &t)| (i, j, t))
    }

    /// Positive demands leaving `s`, in ascending target order.
    pub(crate) fn demands_from(&self, s: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.demands
            .range((s, NodeId(0))..=(s, NodeId(u32::MAX)))
            .map(|(&(_, j), &t)| (j, t))
    }

    pub fn total(&self) -> f64 {
        self.demands.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.demands.is_empty()
    }

    #[inline]
    pub fn are_participants(&self, i: NodeId, j: NodeId) -> bool {
        i != j && (self.get(i, j) > 0.0 || self.get(j, i) > 0.0)
    }

    /// `Participants(i) = {j : t_ij + t_ji > 0}`.
    pub fn participants(&self, i: NodeId) -> Result<BTreeSet<NodeId>> {
        check_node(i, self.n)?;
        let mut out = BTreeSet::new();
        for (s, t, _) in self.demands() {
            if s == i {
                out.insert(t);
            } else if t == i {
                out.insert(s);
            }
        }
        Ok(out)
    }

    /// Unordered participant pairs, each once with `i < j`.
    pub fn participant_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.demands
            .keys()
            .map(|&(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect()
    }

    /// The demand graph `G_T` on pairs with `t_ij + t_ji > 0`.
    pub fn demand_graph(&self) -> Topology {
        let mut g = Topology::new(self.n);
        for (i, j) in self.participant_pairs() {
            let _ = g.add_edge(i, j);
        }
        g
    }
}

/// An undirected topology: no self-loops, no duplicate edges. Edges are kept
/// normalized with the smaller endpoint first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl Topology {
    pub fn new(n: usize) -> Self {
        Topology {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn with_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = Topology::new(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    #[inline]
    fn key(i: NodeId, j: NodeId) -> (NodeId, NodeId) {
        if i < j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, i: NodeId, j: NodeId) -> Result<()> {
        check_node(i, self.n)?;
        check_node(j, self.n)?;
        if i == j {
            return Err(Error::SelfLoop(i.0));
        }
        if !self.edges.insert(Self::key(i, j)) {
            return Err(Error::DuplicateEdge(i.0, j.0));
        }
        Ok(())
    }

    pub fn remove_edge(&mut self, i: NodeId, j: NodeId) -> Result<()> {
        if !self.edges.remove(&Self::key(i, j)) {
            return Err(Error::MissingEdge(i.0, j.0));
        }
        Ok(())
    }

    #[inline]
    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.edges.contains(&Self::key(i, j))
    }

    /// Edges in ascending `(i, j)` order with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    pub fn neighbors(&self, i: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == i {
                out.push(b);
            } else if b == i {
                out.push(a);
            }
        }
        out.sort();
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a.index()].push(b.index());
            adj[b.index()].push(a.index());
        }
        adj
    }

    /// Component id per node; ids are dense, assigned in node order.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        let comp = self.components();
        comp.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn connected(&self, i: NodeId, j: NodeId) -> bool {
        let comp = self.components();
        comp[i.index()] == comp[j.index()]
    }

    /// Acyclic iff `|E| = n - #components`.
    pub fn is_forest(&self) -> bool {
        self.edges.len() + self.component_count() == self.n
    }
}

/// Directed record of who sought each link: arc `(i, j)` means `i` seeks,
/// `j` accepts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContractGraph {
    arcs: BTreeSet<(NodeId, NodeId)>,
}

impl ContractGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, seeker: NodeId, acceptor: NodeId) -> Result<()> {
        if seeker == acceptor {
            return Err(Error::SelfLoop(seeker.0));
        }
        if self.arcs.contains(&(acceptor, seeker)) {
            return Err(Error::InvalidConfiguration(format!(
                "both arcs ({seeker},{acceptor}) and ({acceptor},{seeker}) present"
            )));
        }
        if !self.arcs.insert((seeker, acceptor)) {
            return Err(Error::DuplicateEdge(seeker.0, acceptor.0));
        }
        Ok(())
    }

    pub fn remove(&mut self, seeker: NodeId, acceptor: NodeId) -> Result<()> {
        if !self.arcs.remove(&(seeker, acceptor)) {
            return Err(Error::MissingEdge(seeker.0, acceptor.0));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, seeker: NodeId, acceptor: NodeId) -> bool {
        self.arcs.contains(&(seeker, acceptor))
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// The unique arc on edge `ij`, if any.
    pub fn arc_on_edge(&self, i: NodeId, j: NodeId) -> Option<(NodeId, NodeId)> {
        if self.arcs.contains(&(i, j)) {
            Some((i, j))
        } else if self.arcs.contains(&(j, i)) {
            Some((j, i))
        } else {
            None
        }
    }

    /// Arcs with `i` as either party, in ascending order.
    pub fn incident(&self, i: NodeId) -> Vec<(NodeId, NodeId)> {
        self.arcs
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .copied()
            .collect()
    }
}

/// Signed payments `p_ij` from `i` to `j`. Absent entries are 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PaymentMatrix {
    entries: BTreeMap<(NodeId, NodeId), f64>,
}

impl PaymentMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: NodeId, j: NodeId, p: f64) {
        if p == 0.0 {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), p);
        }
    }

    pub fn clear(&mut self, i: NodeId, j: NodeId) {
        self.entries.remove(&(i, j));
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &p)| (i, j, p))
    }

    /// Net transfer into `i`: `sum_j (p_ji - p_ij)`.
    pub fn net_received(&self, i: NodeId) -> f64 {
        let mut net = 0.0;
        for (&(a, b), &p) in &self.entries {
            if b == i {
                net += p;
            } else if a == i {
                net -= p;
            }
        }
        net
    }
}

/// The full game state `(G, Gamma, P)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub topology: Topology,
    pub contracts: ContractGraph,
    pub payments: PaymentMatrix,
}

impl Configuration {
    /// The empty configuration: no links, no contracts, no payments.
    pub fn empty(n: usize) -> Self {
        Configuration {
            topology: Topology::new(n),
            contracts: ContractGraph::new(),
            payments: PaymentMatrix::new(),
        }
    }

    pub fn from_parts(
        topology: Topology,
        contracts: ContractGraph,
        payments: PaymentMatrix,
    ) -> Result<Self> {
        let config = Configuration {
            topology,
            contracts,
            payments,
        };
        config.validate()?;
        Ok(config)
    }

    /// The canonical feasible configuration on `topology`: each edge gets the
    /// arc seeking from its smaller endpoint, and every payment equals the
    /// current contracting value.
    pub fn canonical(topology: Topology, setting: &GameSetting) -> Result<Self> {
        let mut contracts = ContractGraph::new();
        let mut payments = PaymentMatrix::new();
        for (i, j) in topology.edges() {
            contracts.insert(i, j)?;
            payments.set(i, j, setting.contract_value(i, j, &topology));
        }
        Ok(Configuration {
            topology,
            contracts,
            payments,
        })
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Checks the cross-type invariants: one arc per edge, arcs only on
    /// edges, payments only on arcs.
    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.contracts.arcs() {
            if !self.topology.has_edge(i, j) {
                return Err(Error::InvalidConfiguration(format!(
                    "arc ({i},{j}) without edge"
                )));
            }
        }
        for (i, j) in self.topology.edges() {
            let fwd = self.contracts.contains(i, j);
            let bwd = self.contracts.contains(j, i);
            if fwd == bwd {
                return Err(Error::InvalidConfiguration(format!(
                    "edge {i}-{j} must carry exactly one arc"
                )));
            }
        }
        for (i, j, p) in self.payments.entries() {
            if i == j {
                return Err(Error::InvalidConfiguration(format!("payment p_{i}{i} != 0")));
            }
            if p != 0.0 && !self.contracts.contains(i, j) {
                return Err(Error::InvalidConfiguration(format!(
                    "payment on absent arc ({i},{j})"
                )));
            }
        }
        Ok(())
    }

    /// Successor after breaking every arc in `arcs` simultaneously; surviving
    /// contracts keep their payment, removed ones pay 0.
    pub fn with_arcs_broken(&self, arcs: &[(NodeId, NodeId)]) -> Result<Configuration> {
        let mut next = self.clone();
        for &(i, j) in arcs {
            if !next.contracts.contains(i, j) {
                return Err(Error::IllegalDeviation(format!("no arc ({i},{j}) to break")));
            }
            next.contracts.remove(i, j)?;
            next.topology.remove_edge(i, j)?;
            next.payments.clear(i, j);
        }
        Ok(next)
    }
}

/// A single configuration change, applied with the successor-payment rule:
/// surviving contracts keep their payment, new contracts get the contracting
/// value on the new topology, removed contracts pay 0.
#[derive(Clone, Debug, PartialEq)]
pub enum Deviation {
    /// Break the existing arc `(seeker, acceptor)`, removing its link.
    Break { seeker: NodeId, acceptor: NodeId },
    /// Create arc `(seeker, acceptor)` and its link.
    Add { seeker: NodeId, acceptor: NodeId },
    /// Reset the payment of arc `(seeker, acceptor)` to the current
    /// contracting value.
    Update { seeker: NodeId, acceptor: NodeId },
}

/// Applies one deviation and returns the successor configuration.
pub fn apply_deviation(
    config: &Configuration,
    setting: &GameSetting,
    deviation: &Deviation,
) -> Result<Configuration> {
    match *deviation {
        Deviation::Break { seeker, acceptor } => config.with_arcs_broken(&[(seeker, acceptor)]),
        Deviation::Add { seeker, acceptor } => {
            if config.topology.has_edge(seeker, acceptor) {
                return Err(Error::IllegalDeviation(format!(
                    "edge {seeker}-{acceptor} already present"
                )));
            }
            let mut next = config.clone();
            next.topology.add_edge(seeker, acceptor)?;
            next.contracts.insert(seeker, acceptor)?;
            let q = setting.contract_value(seeker, acceptor, &next.topology);
            next.payments.set(seeker, acceptor, q);
            Ok(next)
        }
        Deviation::Update { seeker, acceptor } => {
            if !config.contracts.contains(seeker, acceptor) {
                return Err(Error::IllegalDeviation(format!(
                    "no arc ({seeker},{acceptor}) to update"
                )));
            }
            let mut next = config.clone();
            let q = setting.contract_value(seeker, acceptor, &next.topology);
            next.payments.set(seeker, acceptor, q);
            Ok(next)
        }
    }
}

/// How the disconnection-cost coefficient is chosen at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta {
    /// `pi*n + max_c*total_traffic*n + q_bound*n + 1`: large enough that
    /// reaching strictly more participants strictly raises utility no matter
    /// what maintenance, routing and payments the deviation also changes.
    Auto,
    /// Explicit value, rejected if below the `Auto` bound.
    Value(f64),
    /// Explicit value, accepted as-is.
    Unchecked(f64),
}

/// Immutable parameters of one game instance.
#[derive(Clone)]
pub struct GameSetting {
    pi: f64,
    routing_costs: Vec<f64>,
    traffic: TrafficMatrix,
    rule: Arc<dyn ContractingRule>,
    beta: f64,
    payment_eps: f64,
}

impl fmt::Debug for GameSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSetting")
            .field("pi", &self.pi)
            .field("routing_costs", &self.routing_costs)
            .field("traffic", &self.traffic)
            .field("rule", &self.rule.spec())
            .field("beta", &self.beta)
            .finish()
    }
}

impl GameSetting {
    pub fn new(
        pi: f64,
        routing_costs: Vec<f64>,
        traffic: TrafficMatrix,
        rule: Arc<dyn ContractingRule>,
        beta: Beta,
    ) -> Result<Self> {
        if !(pi > 0.0) {
            return Err(Error::NonPositivePi(pi));
        }
        Self::build(pi, routing_costs, traffic, rule, beta)
    }

    /// Exploratory constructor: skips the `pi > 0` and beta checks.
    pub fn unchecked(
        pi: f64,
        routing_costs: Vec<f64>,
        traffic: TrafficMatrix,
        rule: Arc<dyn ContractingRule>,
        beta: f64,
    ) -> Result<Self> {
        let n = traffic.node_count();
        if routing_costs.len() != n {
            return Err(Error::MalformedInstance(format!(
                "{} routing costs for {n} nodes",
                routing_costs.len()
            )));
        }
        Ok(GameSetting {
            pi,
            routing_costs,
            traffic,
            rule,
            beta,
            payment_eps: 0.0,
        })
    }

    fn build(
        pi: f64,
        routing_costs: Vec<f64>,
        traffic: TrafficMatrix,
        rule: Arc<dyn ContractingRule>,
        beta: Beta,
    ) -> Result<Self> {
        let n = traffic.node_count();
        if routing_costs.len() != n {
            return Err(Error::MalformedInstance(format!(
                "{} routing costs for {n} nodes",
                routing_costs.len()
            )));
        }
        if let Some(&c) = routing_costs.iter().find(|&&c| c < 0.0) {
            return Err(Error::MalformedInstance(format!("negative routing cost {c}")));
        }
        let min = min_beta(pi, &routing_costs, &traffic, rule.as_ref());
        let beta = match beta {
            Beta::Auto => min,
            Beta::Value(v) => {
                if v < min {
                    return Err(Error::BetaTooSmall { beta: v, min });
                }
                v
            }
            Beta::Unchecked(v) => v,
        };
        Ok(GameSetting {
            pi,
            routing_costs,
            traffic,
            rule,
            beta,
            payment_eps: 0.0,
        })
    }

    /// Tolerance used when deciding whether a stored payment still equals the
    /// contracting value (0 by default; loosen for externally loaded files).
    pub fn with_payment_eps(mut self, eps: f64) -> Self {
        self.payment_eps = eps.max(0.0);
        self
    }

    pub fn node_count(&self) -> usize {
        self.traffic.node_count()
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn payment_eps(&self) -> f64 {
        self.payment_eps
    }

    pub fn routing_cost(&self, i: NodeId) -> f64 {
        self.routing_costs[i.index()]
    }

    pub fn routing_costs(&self) -> &[f64] {
        &self.routing_costs
    }

    pub fn traffic(&self) -> &TrafficMatrix {
        &self.traffic
    }

    pub fn rule(&self) -> &dyn ContractingRule {
        self.rule.as_ref()
    }

    pub fn rule_arc(&self) -> Arc<dyn ContractingRule> {
        Arc::clone(&self.rule)
    }

    /// `Q(i, j; topology)` under this setting's contracting rule.
    #[inline]
    pub fn contract_value(&self, i: NodeId, j: NodeId, topology: &Topology) -> f64 {
        self.rule.evaluate(i, j, topology, &self.traffic)
    }

    /// True when pi, costs, demands and beta are all integer-valued, so
    /// social costs are exactly representable rationals.
    pub fn is_integral(&self) -> bool {
        let int = |v: f64| v.fract() == 0.0 && v.abs() < 2f64.powi(53);
        int(self.pi)
            && int(self.beta)
            && self.routing_costs.iter().all(|&c| int(c))
            && self.traffic.demands().all(|(_, _, t)| int(t))
    }

    /// Participants of `i` unreachable from `i` in `topology`.
    pub fn unreachable_participants(&self, topology: &Topology, i: NodeId) -> usize {
        let comp = topology.components();
        // Each unordered pair may appear in both demand directions.
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for (s, t, _) in self.traffic.demands() {
            let j = if s == i {
                t
            } else if t == i {
                s
            } else {
                continue;
            };
            if comp[i.index()] != comp[j.index()] && seen.insert(j) {
                count += 1;
            }
        }
        count
    }

    /// `C(i; G) = pi*degree + c_i*transit + beta*(unreachable participants)`.
    pub fn node_cost(&self, topology: &Topology, i: NodeId) -> f64 {
        let loads = routing::transit_loads(topology, &self.traffic);
        self.node_cost_with_load(topology, i, loads[i.index()])
    }

    pub(crate) fn node_cost_with_load(&self, topology: &Topology, i: NodeId, load: f64) -> f64 {
        self.pi * topology.degree(i) as f64
            + self.routing_costs[i.index()] * load
            + self.beta * self.unreachable_participants(topology, i) as f64
    }

    /// `U(i; G, P)`: net payments received minus node cost.
    pub fn utility(&self, config: &Configuration, i: NodeId) -> f64 {
        config.payments.net_received(i) - self.node_cost(&config.topology, i)
    }

    /// Utilities of every node, sharing one routing computation.
    pub fn utilities(&self, config: &Configuration) -> Vec<f64> {
        let loads = routing::transit_loads(&config.topology, &self.traffic);
        (0..self.node_count())
            .map(|i| {
                let i = NodeId(i as u32);
                config.payments.net_received(i)
                    - self.node_cost_with_load(&config.topology, i, loads[i.index()])
            })
            .collect()
    }
}

/// The Assumption-2 beta bound: any deviation that reaches strictly more
/// participants gains at least `beta` per participant, which must dominate
/// every other term the deviation can move.
pub fn min_beta(
    pi: f64,
    routing_costs: &[f64],
    traffic: &TrafficMatrix,
    rule: &dyn ContractingRule,
) -> f64 {
    let n = traffic.node_count() as f64;
    let c_max = routing_costs.iter().copied().fold(0.0, f64::max);
    pi.abs() * n + c_max * traffic.total() * n + rule.magnitude_bound(traffic) * n + 1.0
}
