//! Pluggable contracting functions `Q(i, j; G)` and checkers for the two
//! properties the dynamics relies on: anti-symmetry and affinity.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphs;
use crate::model::{NodeId, Topology, TrafficMatrix};

/// A contracting function: the transfer of benefit from `i` to `j` agreed
/// when link `ij` forms under topology `topology`. Must be deterministic and
/// pure in its inputs.
pub trait ContractingRule: Send + Sync {
    /// `Q(i, j; G)`. Panics if `i == j`.
    fn evaluate(&self, i: NodeId, j: NodeId, topology: &Topology, traffic: &TrafficMatrix) -> f64;

    /// Upper bound on `|Q|` over all pairs and topologies; feeds the
    /// disconnection-cost bound.
    fn magnitude_bound(&self, traffic: &TrafficMatrix) -> f64;

    /// Round-trippable description, e.g. `default q_p=2 q_n=1`.
    fn spec(&self) -> String;
}

impl fmt::Debug for dyn ContractingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spec())
    }
}

#[inline]
fn direction_sign(i: NodeId, j: NodeId) -> f64 {
    if i < j {
        1.0
    } else {
        -1.0
    }
}

/// Anti-symmetric, affine rule: participant pairs trade at magnitude `q_p`,
/// non-participant pairs at `q_n`, with the smaller node id paying the
/// larger. The magnitudes ignore the topology so payment updates stay
/// predictable.
#[derive(Clone, Debug, PartialEq)]
pub struct DefaultRule {
    q_p: f64,
    q_n: f64,
}

impl DefaultRule {
    pub fn new(q_p: f64, q_n: f64) -> Result<Self> {
        if !(q_p > q_n && q_n >= 0.0) {
            return Err(Error::InvalidRule(format!(
                "need q_p > q_n >= 0, got q_p={q_p} q_n={q_n}"
            )));
        }
        Ok(DefaultRule { q_p, q_n })
    }

    pub fn q_p(&self) -> f64 {
        self.q_p
    }

    pub fn q_n(&self) -> f64 {
        self.q_n
    }
}

impl Default for DefaultRule {
    fn default() -> Self {
        DefaultRule { q_p: 2.0, q_n: 1.0 }
    }
}

impl ContractingRule for DefaultRule {
    fn evaluate(&self, i: NodeId, j: NodeId, _topology: &Topology, traffic: &TrafficMatrix) -> f64 {
        assert_ne!(i, j, "Q is undefined on the diagonal");
        let magnitude = if traffic.are_participants(i, j) {
            self.q_p
        } else {
            self.q_n
        };
        direction_sign(i, j) * magnitude
    }

    fn magnitude_bound(&self, _traffic: &TrafficMatrix) -> f64 {
        self.q_p
    }

    fn spec(&self) -> String {
        format!("default q_p={} q_n={}", self.q_p, self.q_n)
    }
}

/// Constant-magnitude anti-symmetric rule: the smaller node id pays `v` to
/// the larger, whatever the topology. Used by the best-response reduction,
/// where every leaf pays the star center a fixed amount. Not affine.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantRule {
    v: f64,
}

impl ConstantRule {
    pub fn new(v: f64) -> Self {
        ConstantRule { v }
    }

    pub fn value(&self) -> f64 {
        self.v
    }
}

impl ContractingRule for ConstantRule {
    fn evaluate(&self, i: NodeId, j: NodeId, _topology: &Topology, _traffic: &TrafficMatrix) -> f64 {
        assert_ne!(i, j, "Q is undefined on the diagonal");
        direction_sign(i, j) * self.v
    }

    fn magnitude_bound(&self, _traffic: &TrafficMatrix) -> f64 {
        self.v.abs()
    }

    fn spec(&self) -> String {
        format!("constant v={}", self.v)
    }
}

/// Witness that `Q(i, j; G) != -Q(j, i; G)`.
#[derive(Clone, Debug)]
pub struct AntisymmetryViolation {
    pub i: NodeId,
    pub j: NodeId,
    pub topology: Topology,
    pub forward: f64,
    pub backward: f64,
}

/// Witness that a participant link does not command strictly larger
/// magnitude than a non-participant link.
#[derive(Clone, Debug)]
pub struct AffinityViolation {
    pub i: NodeId,
    pub participant: NodeId,
    pub non_participant: NodeId,
    pub base: Topology,
    pub q_participant: f64,
    pub q_non_participant: f64,
}

const EXHAUSTIVE_NODES: usize = 4;

/// Checks `Q(i, j; G) = -Q(j, i; G)`. Exhaustive over all ordered pairs and
/// all topologies when `n <= 4`, otherwise seeded random sampling within
/// `sample_budget` trials. Returns the first violation found.
pub fn check_antisymmetry(
    rule: &dyn ContractingRule,
    traffic: &TrafficMatrix,
    n: usize,
    sample_budget: usize,
    seed: u64,
) -> Option<AntisymmetryViolation> {
    let violation = |i: NodeId, j: NodeId, g: &Topology| -> Option<AntisymmetryViolation> {
        let forward = rule.evaluate(i, j, g, traffic);
        let backward = rule.evaluate(j, i, g, traffic);
        if (forward + backward).abs() > 1e-12 {
            Some(AntisymmetryViolation {
                i,
                j,
                topology: g.clone(),
                forward,
                backward,
            })
        } else {
            None
        }
    };

    if n <= EXHAUSTIVE_NODES {
        for mask in graphs::all_edge_masks(n) {
            let g = graphs::topology_from_mask(n, mask);
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    if let Some(v) = violation(NodeId(a as u32), NodeId(b as u32), &g) {
                        return Some(v);
                    }
                }
            }
        }
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_budget.max(1) {
        let g = graphs::random_topology(n, 0.5, &mut rng);
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        if let Some(v) = violation(NodeId(a as u32), NodeId(b as u32), &g) {
            return Some(v);
        }
    }
    None
}

/// Checks affinity: for each sampled `i` with participant `j` and
/// non-participant `k`, `|Q(i, j; G+ij)| > |Q(i, k; G+ik)|`. Vacuous pass
/// when no such triple exists.
pub fn check_affinity(
    rule: &dyn ContractingRule,
    traffic: &TrafficMatrix,
    n: usize,
    sample_budget: usize,
    seed: u64,
) -> Option<AffinityViolation> {
    let violation = |i: NodeId, j: NodeId, k: NodeId, base: &Topology| -> Option<AffinityViolation> {
        let mut with_ij = base.clone();
        if !with_ij.has_edge(i, j) {
            with_ij.add_edge(i, j).ok()?;
        }
        let mut with_ik = base.clone();
        if !with_ik.has_edge(i, k) {
            with_ik.add_edge(i, k).ok()?;
        }
        let q_p = rule.evaluate(i, j, &with_ij, traffic);
        let q_n = rule.evaluate(i, k, &with_ik, traffic);
        if q_p.abs() > q_n.abs() {
            None
        } else {
            Some(AffinityViolation {
                i,
                participant: j,
                non_participant: k,
                base: base.clone(),
                q_participant: q_p,
                q_non_participant: q_n,
            })
        }
    };

    let triples: Vec<(NodeId, NodeId, NodeId)> = (0..n)
        .flat_map(|a| {
            let traffic = &traffic;
            (0..n).flat_map(move |b| {
                (0..n).filter_map(move |c| {
                    let (i, j, k) = (NodeId(a as u32), NodeId(b as u32), NodeId(c as u32));
                    if i != j
                        && i != k
                        && j != k
                        && traffic.are_participants(i, j)
                        && !traffic.are_participants(i, k)
                    {
                        Some((i, j, k))
                    } else {
                        None
                    }
                })
            })
        })
        .collect();
    if triples.is_empty() {
        return None;
    }

    if n <= EXHAUSTIVE_NODES {
        for mask in graphs::all_edge_masks(n) {
            let g = graphs::topology_from_mask(n, mask);
            for &(i, j, k) in &triples {
                if let Some(v) = violation(i, j, k, &g) {
                    return Some(v);
                }
            }
        }
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_budget.max(1) {
        let g = graphs::random_topology(n, 0.5, &mut rng);
        let &(i, j, k) = &triples[rng.random_range(0..triples.len())];
        if let Some(v) = violation(i, j, k, &g) {
            return Some(v);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star_traffic() -> TrafficMatrix {
        // 0-1 and 0-2 are participant pairs; 1-2 is not.
        let mut t = TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        t.set(NodeId(2), NodeId(0), 1.0).unwrap();
        t
    }

    #[test]
    fn default_rule_signs_and_magnitudes() {
        let t = star_traffic();
        let g = Topology::new(3);
        let rule = DefaultRule::default();
        assert_eq!(rule.evaluate(NodeId(0), NodeId(1), &g, &t), 2.0);
        assert_eq!(rule.evaluate(NodeId(1), NodeId(0), &g, &t), -2.0);
        assert_eq!(rule.evaluate(NodeId(1), NodeId(2), &g, &t), 1.0);
    }

    #[test]
    fn constant_rule_is_directional() {
        let t = TrafficMatrix::new(4);
        let g = Topology::new(4);
        let rule = ConstantRule::new(2.0);
        // Leaf 1 pays center 3 (largest id) +2 in the reduction layout.
        assert_eq!(rule.evaluate(NodeId(1), NodeId(3), &g, &t), 2.0);
        assert_eq!(rule.evaluate(NodeId(3), NodeId(1), &g, &t), -2.0);
    }

    #[test]
    fn default_rule_passes_both_checks() {
        let t = star_traffic();
        let rule = DefaultRule::default();
        assert!(check_antisymmetry(&rule, &t, 3, 100, 0).is_none());
        assert!(check_affinity(&rule, &t, 3, 100, 0).is_none());
    }

    #[test]
    fn constant_both_directions_fails_antisymmetry() {
        struct Broken;
        impl ContractingRule for Broken {
            fn evaluate(&self, _i: NodeId, _j: NodeId, _g: &Topology, _t: &TrafficMatrix) -> f64 {
                1.0
            }
            fn magnitude_bound(&self, _t: &TrafficMatrix) -> f64 {
                1.0
            }
            fn spec(&self) -> String {
                "broken".into()
            }
        }
        let t = star_traffic();
        let witness = check_antisymmetry(&Broken, &t, 3, 100, 0).expect("must fail");
        assert_ne!(witness.i, witness.j);
    }

    #[test]
    fn constant_rule_passes_antisymmetry() {
        let t = star_traffic();
        let rule = ConstantRule::new(2.0);
        assert!(check_antisymmetry(&rule, &t, 3, 100, 0).is_none());
    }

    #[test]
    fn equal_magnitudes_fail_affinity() {
        struct Flat;
        impl ContractingRule for Flat {
            fn evaluate(&self, i: NodeId, j: NodeId, _g: &Topology, _t: &TrafficMatrix) -> f64 {
                if i < j {
                    2.0
                } else {
                    -2.0
                }
            }
            fn magnitude_bound(&self, _t: &TrafficMatrix) -> f64 {
                2.0
            }
            fn spec(&self) -> String {
                "flat".into()
            }
        }
        let t = star_traffic();
        assert!(check_affinity(&Flat, &t, 3, 100, 0).is_some());
    }

    #[test]
    fn all_to_all_traffic_makes_affinity_vacuous() {
        let mut t = TrafficMatrix::new(3);
        for i in 0..3u32 {
            for j in 0..3u32 {
                if i != j {
                    t.set(NodeId(i), NodeId(j), 1.0).unwrap();
                }
            }
        }
        struct Flat;
        impl ContractingRule for Flat {
            fn evaluate(&self, i: NodeId, j: NodeId, _g: &Topology, _t: &TrafficMatrix) -> f64 {
                if i < j {
                    1.0
                } else {
                    -1.0
                }
            }
            fn magnitude_bound(&self, _t: &TrafficMatrix) -> f64 {
                1.0
            }
            fn spec(&self) -> String {
                "flat".into()
            }
        }
        assert!(check_affinity(&Flat, &t, 3, 100, 0).is_none());
    }

    #[test]
    fn antisymmetric_rules_give_one_nonpositive_direction() {
        let t = star_traffic();
        let g = Topology::new(3);
        let rule = DefaultRule::default();
        for (i, j) in [(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2))] {
            let fwd = rule.evaluate(i, j, &g, &t);
            let bwd = rule.evaluate(j, i, &g, &t);
            assert!((fwd <= 0.0) != (bwd <= 0.0) || (fwd == 0.0 && bwd == 0.0));
        }
    }
}
