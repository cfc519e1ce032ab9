//! The restricted myopic round dynamics. Each round one node is activated by
//! a full-support i.i.d. process and takes the utility-maximizing action
//! among: breaking an incident contract, resetting a contract payment to the
//! current contracting value, proposing a new contract (included only when
//! the counterparty accepts), or doing nothing. Doing nothing wins whenever
//! no action strictly improves.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    apply_deviation, strictly_greater, Configuration, Deviation, GameSetting, NodeId, UTILITY_EPS,
};
use crate::stability::{degree_of, is_sink, DegreeTuple};
use crate::welfare;

/// Full-support i.i.d. activation over the node set, with the seeded random
/// source that also breaks action ties.
#[derive(Clone, Debug)]
pub struct ActivationProcess {
    n: usize,
    weights: Option<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl ActivationProcess {
    pub fn uniform(n: usize, seed: u64) -> Self {
        ActivationProcess {
            n,
            weights: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Every weight must be strictly positive.
    pub fn weighted(weights: Vec<f64>, seed: u64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::MalformedInstance(
                "activation weights must be strictly positive".into(),
            ));
        }
        Ok(ActivationProcess {
            n: weights.len(),
            weights: Some(weights),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn draw(&mut self) -> NodeId {
        match &self.weights {
            None => NodeId(self.rng.random_range(0..self.n) as u32),
            Some(w) => {
                let total: f64 = w.iter().sum();
                let mut r = self.rng.random::<f64>() * total;
                for (i, &wi) in w.iter().enumerate() {
                    r -= wi;
                    if r <= 0.0 {
                        return NodeId(i as u32);
                    }
                }
                NodeId(self.n as u32 - 1)
            }
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Whether a proposal's counterparty accepts at strictly positive gain
/// (default) or also at zero gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcceptanceRule {
    Strict,
    Weak,
}

/// One action available to the active node.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    BreakContract {
        seeker: NodeId,
        acceptor: NodeId,
    },
    UpdatePayment {
        seeker: NodeId,
        acceptor: NodeId,
    },
    ProposeContract {
        to: NodeId,
        payment: f64,
    },
    DoNothing,
}

/// An action with the active node's exact utility change.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub action: Action,
    pub gain: f64,
}

/// One dynamics round.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub round: usize,
    pub actor: NodeId,
    pub action: Action,
    pub degree: DegreeTuple,
    pub social_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<f64>>,
}

/// Enumerates the active node's candidates with the strict acceptance rule.
pub fn enumerate_actions(
    config: &Configuration,
    setting: &GameSetting,
    u: NodeId,
) -> Vec<Candidate> {
    enumerate_actions_with(config, setting, u, AcceptanceRule::Strict)
}

/// Candidates for `u`: every incident contract break, every incident payment
/// reset, every proposal its target would accept (the proposer knows the
/// counterparty's utility, so rejected proposals never become candidates),
/// and doing nothing. Each carries `u`'s exact utility change.
pub fn enumerate_actions_with(
    config: &Configuration,
    setting: &GameSetting,
    u: NodeId,
    acceptance: AcceptanceRule,
) -> Vec<Candidate> {
    let n = config.node_count();
    let current = setting.utilities(config);
    let current_u = current[u.index()];
    let mut out = Vec::new();

    for (seeker, acceptor) in config.contracts.incident(u) {
        let next = config
            .with_arcs_broken(&[(seeker, acceptor)])
            .expect("incident arc");
        out.push(Candidate {
            action: Action::BreakContract { seeker, acceptor },
            gain: setting.utility(&next, u) - current_u,
        });
    }

    for (seeker, acceptor) in config.contracts.incident(u) {
        // Resetting p to Q moves only the payment term, in favor of
        // whichever party the drift hurt.
        let q = setting.contract_value(seeker, acceptor, &config.topology);
        let p = config.payments.get(seeker, acceptor);
        let gain = if u == seeker { p - q } else { q - p };
        out.push(Candidate {
            action: Action::UpdatePayment { seeker, acceptor },
            gain,
        });
    }

    for j in 0..n {
        let v = NodeId(j as u32);
        if v == u || config.topology.has_edge(u, v) {
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
        let gain_v = setting.utility(&next, v) - current[v.index()];
        let accepted = match acceptance {
            AcceptanceRule::Strict => strictly_greater(gain_v, 0.0),
            AcceptanceRule::Weak => gain_v >= -UTILITY_EPS,
        };
        if !accepted {
            continue;
        }
        out.push(Candidate {
            action: Action::ProposeContract {
                to: v,
                payment: setting.contract_value(u, v, &next.topology),
            },
            gain: setting.utility(&next, u) - current_u,
        });
    }

    out.push(Candidate {
        action: Action::DoNothing,
        gain: 0.0,
    });
    out
}

/// Executes one round for active node `u`: an action drawn uniformly among
/// the strict-improvement maximizers, or nothing. The returned record's
/// `round` field is filled by [`run`].
pub fn step<R: Rng>(
    config: &Configuration,
    setting: &GameSetting,
    u: NodeId,
    rng: &mut R,
) -> (Configuration, TraceRecord) {
    step_with(config, setting, u, rng, AcceptanceRule::Strict)
}

pub fn step_with<R: Rng>(
    config: &Configuration,
    setting: &GameSetting,
    u: NodeId,
    rng: &mut R,
    acceptance: AcceptanceRule,
) -> (Configuration, TraceRecord) {
    let candidates = enumerate_actions_with(config, setting, u, acceptance);
    let max_gain = candidates
        .iter()
        .map(|c| c.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    let action = if !strictly_greater(max_gain, 0.0) {
        Action::DoNothing
    } else {
        let ties: Vec<&Candidate> = candidates
            .iter()
            .filter(|c| c.gain >= max_gain - UTILITY_EPS)
            .collect();
        ties[rng.random_range(0..ties.len())].action.clone()
    };
    let next = execute(config, setting, u, &action);
    let record = TraceRecord {
        round: 0,
        actor: u,
        action,
        degree: degree_of(&next, setting),
        social_cost: welfare::social_cost(setting, &next.topology),
        utilities: None,
    };
    (next, record)
}

fn execute(
    config: &Configuration,
    setting: &GameSetting,
    u: NodeId,
    action: &Action,
) -> Configuration {
    match action {
        Action::DoNothing => config.clone(),
        Action::BreakContract { seeker, acceptor } => config
            .with_arcs_broken(&[(*seeker, *acceptor)])
            .expect("candidate arc"),
        Action::UpdatePayment { seeker, acceptor } => apply_deviation(
            config,
            setting,
            &Deviation::Update {
                seeker: *seeker,
                acceptor: *acceptor,
            },
        )
        .expect("candidate arc"),
        Action::ProposeContract { to, .. } => apply_deviation(
            config,
            setting,
            &Deviation::Add {
                seeker: u,
                acceptor: *to,
            },
        )
        .expect("candidate edge"),
    }
}

/// Stopping and instrumentation options for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_rounds: usize,
    pub record_trace: bool,
    pub record_utilities: bool,
    /// Assert the potential monotonicity (`C_F` and `C_E + A_E` never
    /// increase) and the `A_E = 1` progress property at every visited state.
    pub check_invariants: bool,
    pub acceptance: AcceptanceRule,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_rounds: 1_000_000,
            record_trace: false,
            record_utilities: false,
            check_invariants: false,
            acceptance: AcceptanceRule::Strict,
        }
    }
}

/// Result of a dynamics run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_config: Configuration,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    /// Rounds executed, including the quiescence-detection tail.
    pub rounds: usize,
    pub final_degree: DegreeTuple,
    pub final_social_cost: f64,
}

/// Runs the dynamics until every node has been activated at least once since
/// the last state change while choosing to do nothing (quiescence, asserted
/// to coincide with a sink), or until `max_rounds`.
pub fn run(
    config0: Configuration,
    setting: &GameSetting,
    activation: &mut ActivationProcess,
    options: &RunOptions,
) -> Result<RunOutcome> {
    config0.validate()?;
    let n = setting.node_count();
    let mut config = config0;
    let mut trace = Vec::new();
    let mut quiet = vec![false; n];
    let mut quiet_count = 0usize;
    let mut converged = n == 0;
    let mut rounds = 0usize;
    let mut prev = degree_of(&config, setting);

    if options.check_invariants && prev.a_e == 1 {
        assert!(
            participant_link_is_some_best_action(&config, setting, options.acceptance),
            "A_E = 1 state without a best participant-link action"
        );
    }

    for round in 0..options.max_rounds {
        if converged {
            break;
        }
        let u = activation.draw();
        let (next, mut record) =
            step_with(&config, setting, u, activation.rng_mut(), options.acceptance);
        record.round = round;
        rounds = round + 1;
        let changed = record.action != Action::DoNothing;

        if options.check_invariants {
            next.validate()?;
            assert!(
                record.degree.c_f <= prev.c_f,
                "C_F increased: {} -> {}",
                prev,
                record.degree
            );
            assert!(
                record.degree.c_e + record.degree.a_e <= prev.c_e + prev.a_e,
                "C_E + A_E increased: {} -> {}",
                prev,
                record.degree
            );
            if record.degree.a_e == 1 {
                assert!(
                    participant_link_is_some_best_action(&next, setting, options.acceptance),
                    "A_E = 1 state without a best participant-link action"
                );
            }
        }
        prev = record.degree;

        if options.record_trace {
            if options.record_utilities {
                record.utilities = Some(setting.utilities(&next));
            }
            trace.push(record);
        }

        if changed {
            quiet.iter_mut().for_each(|q| *q = false);
            quiet_count = 0;
            config = next;
        } else {
            if !quiet[u.index()] {
                quiet[u.index()] = true;
                quiet_count += 1;
            }
            if quiet_count == n {
                converged = true;
            }
        }
    }

    if converged && n > 0 {
        assert!(
            is_sink(&config, setting),
            "quiescence detected on a non-sink configuration"
        );
    }
    let final_degree = degree_of(&config, setting);
    let final_social_cost = welfare::social_cost(setting, &config.topology);
    Ok(RunOutcome {
        final_config: config,
        trace,
        converged,
        rounds,
        final_degree,
        final_social_cost,
    })
}

/// Lemma-3 scan: some node's maximal-gain candidates include a proposal to
/// one of its participants.
pub fn participant_link_is_some_best_action(
    config: &Configuration,
    setting: &GameSetting,
    acceptance: AcceptanceRule,
) -> bool {
    let traffic = setting.traffic();
    (0..config.node_count()).any(|i| {
        let u = NodeId(i as u32);
        let candidates = enumerate_actions_with(config, setting, u, acceptance);
        let max_gain = candidates
            .iter()
            .map(|c| c.gain)
            .fold(f64::NEG_INFINITY, f64::max);
        if !strictly_greater(max_gain, 0.0) {
            return false;
        }
        candidates.iter().any(|c| {
            c.gain >= max_gain - UTILITY_EPS
                && matches!(c.action, Action::ProposeContract { to, .. }
                    if traffic.are_participants(u, to))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracting::DefaultRule;
    use crate::model::{Beta, Topology, TrafficMatrix};
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

    #[test]
    fn losing_actions_mean_do_nothing() {
        // Zero traffic: any link only costs pi, so nothing ever happens.
        let setting = setting_for(TrafficMatrix::new(3));
        let config = Configuration::empty(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, record) = step(&config, &setting, NodeId(0), &mut rng);
        assert_eq!(record.action, Action::DoNothing);
        assert_eq!(next, config);
    }

    #[test]
    fn stale_contract_update_gain_is_the_drift() {
        let mut t = TrafficMatrix::new(2);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = setting_for(t);
        let topo = Topology::with_edges(2, [(NodeId(0), NodeId(1))]).unwrap();
        let mut config = Configuration::canonical(topo, &setting).unwrap();
        config.payments.set(NodeId(0), NodeId(1), 5.0);
        let candidates = enumerate_actions(&config, &setting, NodeId(0));
        let update = candidates
            .iter()
            .find(|c| matches!(c.action, Action::UpdatePayment { .. }))
            .unwrap();
        // p - Q = 5 - 2.
        assert!((update.gain - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_edge_with_negative_net_payment_gets_broken() {
        // Triangle over all-to-all demand: every contract charges its payer
        // q_p while connectivity survives any single deletion, so the payer
        // of some edge profits from breaking it.
        let mut t = TrafficMatrix::new(3);
        for (i, j) in [(0u32, 1u32), (0, 2), (1, 2)] {
            t.set(NodeId(i), NodeId(j), 1.0).unwrap();
        }
        let setting = setting_for(t);
        let topo = Topology::with_edges(
            3,
            [
                (NodeId(0), NodeId(1)),
                (NodeId(0), NodeId(2)),
                (NodeId(1), NodeId(2)),
            ],
        )
        .unwrap();
        let config = Configuration::canonical(topo, &setting).unwrap();
        let before = degree_of(&config, &setting);
        assert_eq!(before.c_f, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, record) = step(&config, &setting, NodeId(0), &mut rng);
        assert!(matches!(record.action, Action::BreakContract { .. }));
        assert_eq!(degree_of(&next, &setting).c_f, 0);
    }

    #[test]
    fn missing_participant_link_proposal_dominates() {
        // Two components, one cross pair of participants: the proposal is
        // the unique best action for the disconnected endpoint.
        let mut t = TrafficMatrix::new(4);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        t.set(NodeId(2), NodeId(3), 1.0).unwrap();
        t.set(NodeId(1), NodeId(2), 1.0).unwrap();
        let setting = setting_for(t);
        let topo = Topology::with_edges(4, [(NodeId(0), NodeId(1)), (NodeId(2), NodeId(3))]).unwrap();
        let config = Configuration::canonical(topo, &setting).unwrap();
        assert_eq!(degree_of(&config, &setting).a_e, 1);
        assert!(participant_link_is_some_best_action(
            &config,
            &setting,
            AcceptanceRule::Strict
        ));
        let candidates = enumerate_actions(&config, &setting, NodeId(1));
        let best = candidates
            .iter()
            .max_by(|a, b| a.gain.partial_cmp(&b.gain).unwrap())
            .unwrap();
        assert!(
            matches!(best.action, Action::ProposeContract { to, .. } if to == NodeId(2)),
            "best action was {:?}",
            best.action
        );
    }

    #[test]
    fn zero_traffic_converges_immediately() {
        let setting = setting_for(TrafficMatrix::new(4));
        let mut activation = ActivationProcess::uniform(4, 7);
        let outcome = run(
            Configuration::empty(4),
            &setting,
            &mut activation,
            &RunOptions {
                check_invariants: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.final_config, Configuration::empty(4));
    }

    #[test]
    fn all_to_all_six_nodes_reaches_a_spanning_tree() {
        let t = crate::gen::all_to_all_traffic(6, 1.0);
        let setting = setting_for(t);
        let mut activation = ActivationProcess::uniform(6, 42);
        let outcome = run(
            Configuration::empty(6),
            &setting,
            &mut activation,
            &RunOptions {
                max_rounds: 200_000,
                check_invariants: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(outcome.converged);
        let g = &outcome.final_config.topology;
        assert!(g.is_forest());
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.component_count(), 1);
        assert!(is_sink(&outcome.final_config, &setting));
    }

    #[test]
    fn tree_traffic_connects_all_participants() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = crate::gen::tree_traffic(6, &mut rng);
        let setting = setting_for(t);
        let mut activation = ActivationProcess::uniform(6, 9);
        let outcome = run(
            Configuration::empty(6),
            &setting,
            &mut activation,
            &RunOptions {
                max_rounds: 200_000,
                check_invariants: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(outcome.converged);
        let degree = outcome.final_degree;
        assert_eq!((degree.c_f, degree.a_e, degree.a_p), (0, 0, 0));
    }
}
