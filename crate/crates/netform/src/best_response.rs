//! Exact best response by subset enumeration. Deciding whether some
//! deviation reaches a target utility is NP-complete, so this is exponential
//! in the node's degree by necessity and refuses degrees past its bound
//! rather than approximating.

use crate::error::{Error, Result};
use crate::model::{Configuration, GameSetting, NodeId};

/// Degree bound for the `2^degree` enumeration in [`best_response_value`].
pub const BR_DEGREE_BOUND: usize = 25;

/// A best-response decision instance: does `node` have a deviation worth at
/// least `threshold`?
#[derive(Clone, Debug)]
pub struct BRInstance {
    pub setting: GameSetting,
    pub config: Configuration,
    pub node: NodeId,
    pub threshold: f64,
}

/// Maximum utility of `u` over all simultaneous break-sets of its incident
/// arcs (the complete unilateral deviation space under canonical
/// strategies), with the witness break-set. The empty set is included, so
/// the value is at least the current utility.
pub(crate) fn best_break_gain(
    setting: &GameSetting,
    config: &Configuration,
    u: NodeId,
    degree_bound: usize,
) -> Result<(f64, Vec<(NodeId, NodeId)>)> {
    let arcs = config.contracts.incident(u);
    let d = arcs.len();
    if d > degree_bound {
        return Err(Error::DegreeBound {
            degree: d,
            bound: degree_bound,
        });
    }
    let current = setting.utility(config, u);
    let mut best_gain = 0.0f64;
    let mut best_set: Vec<(NodeId, NodeId)> = Vec::new();
    let mut subset: Vec<(NodeId, NodeId)> = Vec::with_capacity(d);
    for mask in 1u64..(1 << d) {
        subset.clear();
        for (k, &arc) in arcs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                subset.push(arc);
            }
        }
        let next = config.with_arcs_broken(&subset)?;
        let gain = setting.utility(&next, u) - current;
        if gain > best_gain {
            best_gain = gain;
            best_set = subset.clone();
        }
    }
    Ok((best_gain, best_set))
}

/// `(max utility, witness break-set)` for `u`.
pub fn best_response_value(
    setting: &GameSetting,
    config: &Configuration,
    u: NodeId,
) -> Result<(f64, Vec<(NodeId, NodeId)>)> {
    let current = setting.utility(config, u);
    let (gain, arcs) = best_break_gain(setting, config, u, BR_DEGREE_BOUND)?;
    Ok((current + gain, arcs))
}

/// Whether the best response reaches the threshold.
pub fn decide_br(instance: &BRInstance) -> Result<bool> {
    let (value, _) = best_response_value(&instance.setting, &instance.config, instance.node)?;
    Ok(value >= instance.threshold - crate::model::UTILITY_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs;
    use crate::model::NodeId;
    use crate::reductions::{brute_independent_set, reduce_is_to_br};

    #[test]
    fn triangle_reduction_keeps_one_leaf() {
        let k3 = graphs::topology_from_mask(3, 0b111);
        let instance = reduce_is_to_br(&k3, 1).unwrap();
        let (value, kept_breaks) =
            best_response_value(&instance.setting, &instance.config, instance.node).unwrap();
        assert_eq!(value, 1.0);
        // alpha(K3) = 1: two of the three leaves get cut.
        assert_eq!(kept_breaks.len(), 2);
        assert_eq!(brute_independent_set(&k3).unwrap(), 1);
    }

    #[test]
    fn four_cycle_reduction_keeps_opposite_leaves() {
        let mut g = crate::model::Topology::new(4);
        for (i, j) in [(0u32, 1u32), (1, 2), (2, 3), (0, 3)] {
            g.add_edge(NodeId(i), NodeId(j)).unwrap();
        }
        let instance = reduce_is_to_br(&g, 2).unwrap();
        let (value, _) =
            best_response_value(&instance.setting, &instance.config, instance.node).unwrap();
        assert_eq!(value, 2.0);
        assert_eq!(brute_independent_set(&g).unwrap(), 2);
    }

    #[test]
    fn isolated_node_keeps_current_utility() {
        let mut t = crate::model::TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = crate::gen::uniform_setting(t).unwrap();
        let config = Configuration::empty(3);
        let (value, witness) = best_response_value(&setting, &config, NodeId(2)).unwrap();
        assert_eq!(value, setting.utility(&config, NodeId(2)));
        assert!(witness.is_empty());
    }

    #[test]
    fn decide_br_thresholds_around_alpha() {
        let k3 = graphs::topology_from_mask(3, 0b111);
        let mut yes = reduce_is_to_br(&k3, 1).unwrap();
        assert!(decide_br(&yes).unwrap());
        yes.threshold = 2.0;
        assert!(!decide_br(&yes).unwrap());
        // The identity deviation always reaches the current utility.
        let current = yes.setting.utility(&yes.config, yes.node);
        yes.threshold = current;
        assert!(decide_br(&yes).unwrap());
    }

    #[test]
    fn degree_bound_is_enforced() {
        let mut t = crate::model::TrafficMatrix::new(30);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        let setting = crate::gen::uniform_setting(t).unwrap();
        let mut config = Configuration::empty(30);
        for j in 1..30u32 {
            config.topology.add_edge(NodeId(0), NodeId(j)).unwrap();
            config.contracts.insert(NodeId(0), NodeId(j)).unwrap();
        }
        assert!(matches!(
            best_response_value(&setting, &config, NodeId(0)),
            Err(Error::DegreeBound { .. })
        ));
    }
}
