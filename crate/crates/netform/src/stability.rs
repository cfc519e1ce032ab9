//! Equilibrium machinery: the topology characterization (forests whose every
//! edge separates participants), configuration-level Nash and pairwise
//! stability checkers, sink detection, and the degree-of-configuration
//! potential that drives the dynamics' convergence argument.

use std::fmt;

use serde::Serialize;

use crate::best_response;
use crate::dynamics;
use crate::error::Result;
use crate::graphs::UnionFind;
use crate::model::{
    apply_deviation, strictly_greater, Configuration, Deviation, GameSetting, NodeId, Topology,
    TrafficMatrix,
};

/// Maximum node degree the subset brute force in [`is_nash`] accepts.
pub const NASH_DEGREE_BOUND: usize = 20;

/// The convergence potential `(C_F, C_E, A_E, A_P)` of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeTuple {
    /// Edges beyond a spanning forest.
    pub c_f: usize,
    /// Maximum number of non-participant edges over all spanning forests.
    pub c_e: usize,
    /// Minimum number of edges to add so every node reaches its participants.
    pub a_e: usize,
    /// Contracts whose payment differs from the current contracting value.
    pub a_p: usize,
}

impl fmt::Display for DegreeTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.c_f, self.c_e, self.a_e, self.a_p)
    }
}

/// Why a topology fails the pairwise-Nash characterization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologyViolation {
    /// A participant pair sits in different components.
    DisconnectedParticipants { u: NodeId, v: NodeId },
    /// The graph contains a cycle.
    ContainsCycle,
    /// Removing this edge leaves no participant of one endpoint on the other
    /// side, so some contracting function makes its deletion profitable.
    RedundantEdge { u: NodeId, v: NodeId },
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyViolation::DisconnectedParticipants { u, v } => {
                write!(f, "participants {u} and {v} are disconnected")
            }
            TopologyViolation::ContainsCycle => write!(f, "topology contains a cycle"),
            TopologyViolation::RedundantEdge { u, v } => {
                write!(f, "edge {u}-{v} separates no participants")
            }
        }
    }
}

/// Verdict of the topology characterization, with every violated condition.
#[derive(Clone, Debug)]
pub struct PneTopologyReport {
    pub violations: Vec<TopologyViolation>,
}

impl PneTopologyReport {
    pub fn is_pne(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A topology is a pairwise-Nash topology iff (1) every participant pair is
/// connected, (2) it is a forest, and (3) removing any edge `uv` leaves a
/// participant of `v` on `u`'s side and a participant of `u` on `v`'s side.
pub fn is_pne_topology(topology: &Topology, traffic: &TrafficMatrix) -> PneTopologyReport {
    let mut violations = Vec::new();
    let comp = topology.components();
    for (u, v) in traffic.participant_pairs() {
        if comp[u.index()] != comp[v.index()] {
            violations.push(TopologyViolation::DisconnectedParticipants { u, v });
        }
    }
    if !topology.is_forest() {
        violations.push(TopologyViolation::ContainsCycle);
    }
    for (u, v) in topology.edges() {
        let mut cut = topology.clone();
        cut.remove_edge(u, v).expect("edge exists");
        let cut_comp = cut.components();
        let u_side_has_participant_of_v = traffic
            .participants(v)
            .expect("in range")
            .iter()
            .any(|p| cut_comp[p.index()] == cut_comp[u.index()]);
        let v_side_has_participant_of_u = traffic
            .participants(u)
            .expect("in range")
            .iter()
            .any(|p| cut_comp[p.index()] == cut_comp[v.index()]);
        if !u_side_has_participant_of_v || !v_side_has_participant_of_u {
            violations.push(TopologyViolation::RedundantEdge { u, v });
        }
    }
    PneTopologyReport { violations }
}

/// Witness of a pairwise-stability failure.
#[derive(Clone, Debug)]
pub enum StabilityWitness {
    /// `node` strictly gains by deleting `edge`.
    ProfitableDeletion {
        node: NodeId,
        edge: (NodeId, NodeId),
        gain: f64,
    },
    /// Both endpoints strictly gain by adding the link at the contracting
    /// value on the new topology.
    ProfitableAddition {
        u: NodeId,
        v: NodeId,
        gain_u: f64,
        gain_v: f64,
    },
}

/// Checks pairwise stability: no profitable single deletion, and no link
/// addition both endpoints strictly profit from. New links are priced
/// `Q(u, v; G+uv)` with the smaller endpoint seeking; under an
/// anti-symmetric rule the seeking direction does not affect utilities.
pub fn is_pairwise_stable(
    config: &Configuration,
    setting: &GameSetting,
) -> (bool, Option<StabilityWitness>) {
    let n = config.node_count();
    let current = setting.utilities(config);
    for (u, v) in config.topology.edges() {
        let (seeker, acceptor) = config
            .contracts
            .arc_on_edge(u, v)
            .expect("validated configuration");
        let next = config
            .with_arcs_broken(&[(seeker, acceptor)])
            .expect("arc exists");
        for node in [u, v] {
            let gain = setting.utility(&next, node) - current[node.index()];
            if strictly_greater(gain, 0.0) {
                return (
                    false,
                    Some(StabilityWitness::ProfitableDeletion {
                        node,
                        edge: (u, v),
                        gain,
                    }),
                );
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (u, v) = (NodeId(i as u32), NodeId(j as u32));
            if config.topology.has_edge(u, v) {
                continue;
            }
            let next = apply_deviation(
                config,
                setting,
                &Deviation::Add {
                    seeker: u,
                    acceptor: v,
                },
            )
            .expect("edge absent");
            let gain_u = setting.utility(&next, u) - current[u.index()];
            let gain_v = setting.utility(&next, v) - current[v.index()];
            if strictly_greater(gain_u, 0.0) && strictly_greater(gain_v, 0.0) {
                return (
                    false,
                    Some(StabilityWitness::ProfitableAddition {
                        u,
                        v,
                        gain_u,
                        gain_v,
                    }),
                );
            }
        }
    }
    (true, None)
}

/// A strictly improving set of contract breaks for one node.
#[derive(Clone, Debug)]
pub struct NashWitness {
    pub node: NodeId,
    pub arcs: Vec<(NodeId, NodeId)>,
    pub gain: f64,
}

/// Checks the Nash condition by brute force over every subset of every
/// node's incident arcs — the complete unilateral deviation space under
/// canonical strategies, where a unilateral move can only break contracts.
/// Errors when some node's degree exceeds [`NASH_DEGREE_BOUND`].
pub fn is_nash(config: &Configuration, setting: &GameSetting) -> Result<Option<NashWitness>> {
    for i in 0..config.node_count() {
        let u = NodeId(i as u32);
        let (gain, arcs) = best_response::best_break_gain(setting, config, u, NASH_DEGREE_BOUND)?;
        if strictly_greater(gain, 0.0) {
            return Ok(Some(NashWitness {
                node: u,
                arcs,
                gain,
            }));
        }
    }
    Ok(None)
}

/// Fast path: only single breaks are tested. On sink configurations this
/// agrees with the subset brute force (minimal profitable break-sets reduce
/// to single breaks there); the agreement is asserted in tests, never
/// assumed elsewhere.
pub fn is_nash_single_break(
    config: &Configuration,
    setting: &GameSetting,
) -> Option<NashWitness> {
    for i in 0..config.node_count() {
        let u = NodeId(i as u32);
        let current = setting.utility(config, u);
        for arc in config.contracts.incident(u) {
            let next = config.with_arcs_broken(&[arc]).expect("incident arc");
            let gain = setting.utility(&next, u) - current;
            if strictly_greater(gain, 0.0) {
                return Some(NashWitness {
                    node: u,
                    arcs: vec![arc],
                    gain,
                });
            }
        }
    }
    None
}

/// Nash and pairwise stable.
pub fn is_pairwise_nash(config: &Configuration, setting: &GameSetting) -> Result<bool> {
    Ok(is_nash(config, setting)?.is_none() && is_pairwise_stable(config, setting).0)
}

/// Computes the degree `(C_F, C_E, A_E, A_P)` of a configuration.
///
/// `C_E` is found greedily: grow a spanning forest preferring
/// non-participant edges. Non-participant edges form independent augmenting
/// choices in the graphic matroid, so the greedy count is the maximum; the
/// equality with exhaustive forest enumeration is checked in tests.
pub fn degree_of(config: &Configuration, setting: &GameSetting) -> DegreeTuple {
    let topology = &config.topology;
    let traffic = setting.traffic();
    let n = topology.node_count();
    let comp = topology.components();
    let comp_count = comp.iter().copied().max().map_or(0, |m| m + 1);

    let c_f = topology.edge_count() - (n - comp_count);

    let mut uf = UnionFind::new(n);
    let mut c_e = 0;
    for (u, v) in topology.edges() {
        if !traffic.are_participants(u, v) && uf.union(u.index(), v.index()) {
            c_e += 1;
        }
    }
    for (u, v) in topology.edges() {
        if traffic.are_participants(u, v) {
            uf.union(u.index(), v.index());
        }
    }

    // A_E: connect the requirement graph on topology components, one edge
    // per merge.
    let mut req = UnionFind::new(comp_count.max(1));
    let mut a_e = 0;
    for (u, v) in traffic.participant_pairs() {
        let (cu, cv) = (comp[u.index()], comp[v.index()]);
        if cu != cv && req.union(cu, cv) {
            a_e += 1;
        }
    }

    let eps = setting.payment_eps();
    let mut a_p = 0;
    for (i, j) in config.contracts.arcs() {
        let q = setting.contract_value(i, j, topology);
        let p = config.payments.get(i, j);
        let stale = if eps > 0.0 { (p - q).abs() > eps } else { p != q };
        if stale {
            a_p += 1;
        }
    }

    DegreeTuple { c_f, c_e, a_e, a_p }
}

/// True when every node's best available action is to do nothing.
pub fn is_sink(config: &Configuration, setting: &GameSetting) -> bool {
    (0..config.node_count()).all(|i| {
        let u = NodeId(i as u32);
        !dynamics::enumerate_actions(config, setting, u)
            .iter()
            .any(|c| strictly_greater(c.gain, 0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracting::DefaultRule;
    use crate::model::{Beta, TrafficMatrix};
    use std::sync::Arc;

    fn setting_for(traffic: TrafficMatrix) -> GameSetting {
        let n = traffic.node_count();
        GameSetting::new(
            1.0,
            vec![1.0; n],
            traffic,
            Arc::new(DefaultRule::default()),
            Beta::Auto,
        )
        .unwrap()
    }

    fn topo(n: usize, edges: &[(u32, u32)]) -> Topology {
        Topology::with_edges(n, edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap()
    }

    fn figure_one_traffic() -> TrafficMatrix {
        // a=0, b=1, c=2, d=3; demand on ac, ad, bc, bd.
        let mut t = TrafficMatrix::new(4);
        for (i, j) in [(0u32, 2u32), (0, 3), (1, 2), (1, 3)] {
            t.set(NodeId(i), NodeId(j), 1.0).unwrap();
        }
        t
    }

    #[test]
    fn figure_one_topology_is_pne_but_not_a_demand_forest() {
        let t = figure_one_traffic();
        let g = topo(4, &[(0, 1), (0, 2), (1, 3)]);
        assert!(is_pne_topology(&g, &t).is_pne());
        // The ab edge is not a demand edge, so G is no spanning forest of G_T.
        assert!(!t.demand_graph().has_edge(NodeId(0), NodeId(1)));
    }

    #[test]
    fn cycle_on_complete_traffic_is_rejected() {
        let mut t = TrafficMatrix::new(4);
        for i in 0..4u32 {
            for j in (i + 1)..4u32 {
                t.set(NodeId(i), NodeId(j), 1.0).unwrap();
            }
        }
        let g = topo(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let report = is_pne_topology(&g, &t);
        assert!(!report.is_pne());
        assert!(report
            .violations
            .contains(&TopologyViolation::ContainsCycle));
    }

    #[test]
    fn zero_traffic_empty_passes_single_edge_fails() {
        let t = TrafficMatrix::new(3);
        assert!(is_pne_topology(&Topology::new(3), &t).is_pne());
        let g = topo(3, &[(0, 1)]);
        let report = is_pne_topology(&g, &t);
        assert_eq!(
            report.violations,
            vec![TopologyViolation::RedundantEdge {
                u: NodeId(0),
                v: NodeId(1)
            }]
        );
    }

    #[test]
    fn mutual_demand_on_empty_topology_is_unstable() {
        let mut t = TrafficMatrix::new(2);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        t.set(NodeId(1), NodeId(0), 1.0).unwrap();
        let setting = setting_for(t);
        let config = Configuration::empty(2);
        let (stable, witness) = is_pairwise_stable(&config, &setting);
        assert!(!stable);
        assert!(matches!(
            witness,
            Some(StabilityWitness::ProfitableAddition { .. })
        ));
    }

    #[test]
    fn triangle_with_updated_payments_is_unstable() {
        let mut t = TrafficMatrix::new(3);
        for (i, j) in [(0u32, 1u32), (0, 2), (1, 2)] {
            t.set(NodeId(i), NodeId(j), 1.0).unwrap();
        }
        let setting = setting_for(t);
        let g = topo(3, &[(0, 1), (0, 2), (1, 2)]);
        let config = Configuration::canonical(g, &setting).unwrap();
        let (stable, witness) = is_pairwise_stable(&config, &setting);
        assert!(!stable);
        assert!(matches!(
            witness,
            Some(StabilityWitness::ProfitableDeletion { .. })
        ));
    }

    #[test]
    fn spanning_tree_of_complete_traffic_is_pairwise_nash() {
        let mut t = TrafficMatrix::new(4);
        for i in 0..4u32 {
            for j in (i + 1)..4u32 {
                t.set(NodeId(i), NodeId(j), 1.0).unwrap();
            }
        }
        let setting = setting_for(t);
        let g = topo(4, &[(0, 1), (1, 2), (2, 3)]);
        let config = Configuration::canonical(g, &setting).unwrap();
        assert!(is_pairwise_stable(&config, &setting).0);
        assert!(is_nash(&config, &setting).unwrap().is_none());
        assert!(is_pairwise_nash(&config, &setting).unwrap());
    }

    #[test]
    fn empty_configuration_is_nash() {
        let t = figure_one_traffic();
        let setting = setting_for(t);
        let config = Configuration::empty(4);
        assert!(is_nash(&config, &setting).unwrap().is_none());
    }

    #[test]
    fn stale_overpaying_contract_breaks_nashness() {
        let mut t = TrafficMatrix::new(2);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = setting_for(t);
        let g = topo(2, &[(0, 1)]);
        let mut config = Configuration::canonical(g, &setting).unwrap();
        // Node 0 pays far above the contracting value; even losing the
        // participant is cheaper than honoring it.
        config
            .payments
            .set(NodeId(0), NodeId(1), setting.beta() + 10.0);
        let witness = is_nash(&config, &setting).unwrap().expect("profitable break");
        assert_eq!(witness.node, NodeId(0));
        assert!(!is_pairwise_nash(&config, &setting).unwrap());
    }

    #[test]
    fn degree_of_path_traffic_example() {
        // G_T = path 0-1-2, G = {01, 02} with updated payments: (0, 1, 0, 0).
        let mut t = TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        t.set(NodeId(1), NodeId(2), 1.0).unwrap();
        let setting = setting_for(t);
        let g = topo(3, &[(0, 1), (0, 2)]);
        let config = Configuration::canonical(g, &setting).unwrap();
        assert_eq!(
            degree_of(&config, &setting),
            DegreeTuple {
                c_f: 0,
                c_e: 1,
                a_e: 0,
                a_p: 0
            }
        );
    }

    #[test]
    fn degree_of_isolated_all_to_all() {
        let mut t = TrafficMatrix::new(3);
        for i in 0..3u32 {
            for j in 0..3u32 {
                if i != j {
                    t.set(NodeId(i), NodeId(j), 1.0).unwrap();
                }
            }
        }
        let setting = setting_for(t);
        let config = Configuration::empty(3);
        assert_eq!(
            degree_of(&config, &setting),
            DegreeTuple {
                c_f: 0,
                c_e: 0,
                a_e: 2,
                a_p: 0
            }
        );
    }

    #[test]
    fn stale_contract_counts_in_a_p_and_blocks_sink() {
        let mut t = TrafficMatrix::new(2);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = setting_for(t);
        let g = topo(2, &[(0, 1)]);
        let mut config = Configuration::canonical(g, &setting).unwrap();
        config.payments.set(NodeId(0), NodeId(1), 5.0);
        let degree = degree_of(&config, &setting);
        assert_eq!(degree.a_p, 1);
        assert!(!is_sink(&config, &setting));
    }

    #[test]
    fn zero_degree_configuration_is_sink() {
        let mut t = TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        t.set(NodeId(1), NodeId(2), 1.0).unwrap();
        let setting = setting_for(t);
        let g = topo(3, &[(0, 1), (1, 2)]);
        let config = Configuration::canonical(g, &setting).unwrap();
        assert_eq!(
            degree_of(&config, &setting),
            DegreeTuple {
                c_f: 0,
                c_e: 0,
                a_e: 0,
                a_p: 0
            }
        );
        assert!(is_sink(&config, &setting));
        assert!(is_pairwise_nash(&config, &setting).unwrap());
    }

    #[test]
    fn empty_configuration_with_zero_traffic_is_sink() {
        let t = TrafficMatrix::new(3);
        let setting = setting_for(t);
        let config = Configuration::empty(3);
        assert!(is_sink(&config, &setting));
    }

    #[test]
    fn greedy_c_e_matches_exhaustive_enumeration() {
        use crate::oracles;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = 5;
            let g = crate::graphs::random_topology(n, 0.45, &mut rng);
            let t = crate::gen::random_traffic(n, 0.4, 3, &mut rng);
            let setting = setting_for(t);
            let config = Configuration::canonical(g.clone(), &setting).unwrap();
            let greedy = degree_of(&config, &setting).c_e;
            let exhaustive =
                oracles::max_non_participant_forest_edges(&g, setting.traffic());
            assert_eq!(greedy, exhaustive);
        }
    }
}
