//! Social cost, brute-force optimum, price of stability/anarchy, and the
//! LOWER SC decision problems at desk scale. Enumeration partitions the
//! edge-mask space across threads and merges by a deterministic total order
//! (cost, then mask), so results are reproducible.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs;
use crate::model::{GameSetting, NodeId, Topology, UTILITY_EPS};
use crate::routing;
use crate::stability::is_pne_topology;

/// Default cap on node count for the exhaustive scans (`2^(n(n-1)/2)`
/// topologies). Callers can raise it explicitly through the `_bounded`
/// variants.
pub const DEFAULT_ENUM_BOUND: usize = 7;

/// `SC(G) = sum_u C(u; G)`. Payments cancel (contracts are zero-sum
/// transfers), so the social cost depends only on the topology.
pub fn social_cost(setting: &GameSetting, topology: &Topology) -> f64 {
    let loads = routing::transit_loads(topology, setting.traffic());
    let comp = topology.components();
    let mut sc = 0.0;
    for i in 0..topology.node_count() {
        let node = NodeId(i as u32);
        sc += setting.pi() * topology.degree(node) as f64
            + setting.routing_cost(node) * loads[i];
    }
    for (u, v) in setting.traffic().participant_pairs() {
        if comp[u.index()] != comp[v.index()] {
            sc += 2.0 * setting.beta();
        }
    }
    sc
}

/// Exact rational social cost; all parameters convert from `f64` exactly.
pub fn social_cost_exact(setting: &GameSetting, topology: &Topology) -> BigRational {
    let rat = |v: f64| BigRational::from_float(v).expect("finite parameter");
    let loads = routing::transit_loads_exact(topology, setting.traffic());
    let comp = topology.components();
    let mut sc = BigRational::zero();
    for i in 0..topology.node_count() {
        let node = NodeId(i as u32);
        sc += rat(setting.pi()) * BigRational::from_integer(BigInt::from(topology.degree(node)));
        sc += rat(setting.routing_cost(node)) * loads[i].clone();
    }
    for (u, v) in setting.traffic().participant_pairs() {
        if comp[u.index()] != comp[v.index()] {
            sc += BigRational::from_integer(BigInt::from(2)) * rat(setting.beta());
        }
    }
    sc
}

fn check_enum_bound(n: usize, bound: usize) -> Result<()> {
    if n > bound {
        return Err(Error::SizeBound { n, bound });
    }
    Ok(())
}

/// Scans every labeled topology in parallel, returning the minimizer of
/// `(social cost, edge mask)`.
fn scan_all_topologies(setting: &GameSetting) -> (u64, f64) {
    let n = setting.node_count();
    let bits = n * (n.saturating_sub(1)) / 2;
    (0u64..(1 << bits))
        .into_par_iter()
        .map(|mask| {
            let sc = social_cost(setting, &graphs::topology_from_mask(n, mask));
            (mask, sc)
        })
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .expect("nonempty mask space")
}

/// Global social-cost minimizer over all topologies (disconnected ones
/// included; the disconnection cost prices them). Ties break to the
/// lexicographically least edge set.
pub fn optimal_topology(setting: &GameSetting) -> Result<(Topology, f64)> {
    optimal_topology_bounded(setting, DEFAULT_ENUM_BOUND)
}

pub fn optimal_topology_bounded(setting: &GameSetting, bound: usize) -> Result<(Topology, f64)> {
    let n = setting.node_count();
    check_enum_bound(n, bound)?;
    let (mask, sc) = scan_all_topologies(setting);
    Ok((graphs::topology_from_mask(n, mask), sc))
}

/// Price of a topology against the optimum; `0/0` counts as 1.
pub fn price(sc: f64, sc_opt: f64) -> f64 {
    if sc_opt == 0.0 {
        if sc == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        sc / sc_opt
    }
}

/// Welfare summary over the pairwise-Nash topologies.
#[derive(Clone, Debug)]
pub struct WelfareReport {
    pub sc_opt: f64,
    pub optimal: Topology,
    pub pne_count: usize,
    pub pos: f64,
    pub poa: f64,
    pub best_pne: Topology,
    pub best_pne_sc: f64,
    pub worst_pne: Topology,
    pub worst_pne_sc: f64,
}

/// Enumerates every forest, filters by the topology characterization, and
/// reports the extremal prices. Errors when no pairwise-Nash topology
/// exists, which cannot happen: spanning forests of the demand graph always
/// qualify.
pub fn pos_poa(setting: &GameSetting) -> Result<WelfareReport> {
    pos_poa_bounded(setting, DEFAULT_ENUM_BOUND)
}

pub fn pos_poa_bounded(setting: &GameSetting, bound: usize) -> Result<WelfareReport> {
    let n = setting.node_count();
    check_enum_bound(n, bound)?;
    let traffic = setting.traffic();
    let pne: Vec<(u64, f64)> = graphs::forest_masks(n)
        .into_par_iter()
        .filter_map(|mask| {
            let g = graphs::topology_from_mask(n, mask);
            if is_pne_topology(&g, traffic).is_pne() {
                Some((mask, social_cost(setting, &g)))
            } else {
                None
            }
        })
        .collect();
    if pne.is_empty() {
        return Err(Error::MalformedInstance(
            "no pairwise-Nash topology found".into(),
        ));
    }
    let (best_mask, best_sc) = pne
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .unwrap();
    let (worst_mask, worst_sc) = pne
        .iter()
        .copied()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        .unwrap();
    let (optimal, sc_opt) = optimal_topology_bounded(setting, bound)?;
    Ok(WelfareReport {
        sc_opt,
        optimal,
        pne_count: pne.len(),
        pos: price(best_sc, sc_opt),
        poa: price(worst_sc, sc_opt),
        best_pne: graphs::topology_from_mask(n, best_mask),
        best_pne_sc: best_sc,
        worst_pne: graphs::topology_from_mask(n, worst_mask),
        worst_pne_sc: worst_sc,
    })
}

/// Verifies candidate masks in ascending order. Integral instances are
/// re-checked in exact arithmetic so `SC <= C` is bit-exact; otherwise the
/// float comparison carries the utility tolerance.
fn verify_candidates(
    setting: &GameSetting,
    n: usize,
    threshold: f64,
    mut candidates: Vec<u64>,
) -> Option<Topology> {
    candidates.sort_unstable();
    let exact = setting.is_integral();
    let threshold_exact = BigRational::from_float(threshold)?;
    for mask in candidates {
        let g = graphs::topology_from_mask(n, mask);
        let ok = if exact {
            social_cost_exact(setting, &g) <= threshold_exact
        } else {
            social_cost(setting, &g) <= threshold + UTILITY_EPS
        };
        if ok {
            return Some(g);
        }
    }
    None
}

fn candidate_margin(threshold: f64) -> f64 {
    1e-6 * threshold.abs().max(1.0)
}

/// Does any topology have social cost at most `threshold`? Returns the
/// least witness by edge mask.
pub fn decide_lower_sc(setting: &GameSetting, threshold: f64) -> Result<Option<Topology>> {
    decide_lower_sc_bounded(setting, threshold, DEFAULT_ENUM_BOUND)
}

pub fn decide_lower_sc_bounded(
    setting: &GameSetting,
    threshold: f64,
    bound: usize,
) -> Result<Option<Topology>> {
    let n = setting.node_count();
    check_enum_bound(n, bound)?;
    let bits = n * (n.saturating_sub(1)) / 2;
    let margin = candidate_margin(threshold);
    let candidates: Vec<u64> = (0u64..(1 << bits))
        .into_par_iter()
        .filter(|&mask| {
            social_cost(setting, &graphs::topology_from_mask(n, mask)) <= threshold + margin
        })
        .collect();
    Ok(verify_candidates(setting, n, threshold, candidates))
}

/// Does any pairwise-Nash topology have social cost at most `threshold`?
pub fn decide_lower_sc_equilibrium(
    setting: &GameSetting,
    threshold: f64,
) -> Result<Option<Topology>> {
    decide_lower_sc_equilibrium_bounded(setting, threshold, DEFAULT_ENUM_BOUND)
}

pub fn decide_lower_sc_equilibrium_bounded(
    setting: &GameSetting,
    threshold: f64,
    bound: usize,
) -> Result<Option<Topology>> {
    let n = setting.node_count();
    check_enum_bound(n, bound)?;
    let traffic = setting.traffic();
    let margin = candidate_margin(threshold);
    let candidates: Vec<u64> = graphs::forest_masks(n)
        .into_par_iter()
        .filter(|&mask| {
            let g = graphs::topology_from_mask(n, mask);
            is_pne_topology(&g, traffic).is_pne()
                && social_cost(setting, &g) <= threshold + margin
        })
        .collect();
    Ok(verify_candidates(setting, n, threshold, candidates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::model::TrafficMatrix;
    use num_traits::ToPrimitive;

    #[test]
    fn star_social_cost_example() {
        // Complete demand on 3 nodes, unit everything, star at node 0:
        // maintenance 4, loads 6 + 4 + 4.
        let t = gen::all_to_all_traffic(3, 1.0);
        let setting = gen::uniform_setting(t).unwrap();
        let star = gen::star_topology(3, NodeId(0)).unwrap();
        assert_eq!(social_cost(&setting, &star), 18.0);
        assert_eq!(
            social_cost_exact(&setting, &star).to_f64().unwrap(),
            18.0
        );
    }

    #[test]
    fn empty_topology_zero_traffic_costs_nothing() {
        let setting = gen::uniform_setting(TrafficMatrix::new(4)).unwrap();
        assert_eq!(social_cost(&setting, &Topology::new(4)), 0.0);
    }

    #[test]
    fn utilities_sum_to_negative_social_cost() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let t = gen::random_traffic(5, 0.5, 4, &mut rng);
            let setting = gen::uniform_setting(t).unwrap();
            let g = crate::graphs::random_topology(5, 0.5, &mut rng);
            let config = crate::model::Configuration::canonical(g.clone(), &setting).unwrap();
            let sum: f64 = setting.utilities(&config).iter().sum();
            let sc = social_cost(&setting, &g);
            assert!((sum + sc).abs() < 1e-6, "sum {sum} vs -sc {}", -sc);
        }
    }

    #[test]
    fn tree_demand_graph_is_optimal() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let t = gen::tree_traffic(5, &mut rng);
        let g_t = t.demand_graph();
        let setting = gen::uniform_setting(t).unwrap();
        let (opt, sc_opt) = optimal_topology(&setting).unwrap();
        assert_eq!(opt, g_t);
        assert_eq!(sc_opt, social_cost(&setting, &g_t));
    }

    #[test]
    fn cheap_links_make_the_complete_graph_optimal() {
        // pi below c_min * t_min: every link pays for itself.
        let t = gen::all_to_all_traffic(4, 2.0);
        let setting = GameSetting::new(
            0.5,
            vec![1.0; 4],
            t,
            std::sync::Arc::new(crate::contracting::DefaultRule::default()),
            crate::model::Beta::Auto,
        )
        .unwrap();
        let (opt, _) = optimal_topology(&setting).unwrap();
        assert_eq!(opt.edge_count(), 6);
    }

    #[test]
    fn zero_traffic_optimum_is_empty() {
        let setting = gen::uniform_setting(TrafficMatrix::new(4)).unwrap();
        let (opt, sc_opt) = optimal_topology(&setting).unwrap();
        assert_eq!(opt.edge_count(), 0);
        assert_eq!(sc_opt, 0.0);
    }

    #[test]
    fn tree_pattern_prices_are_one() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        let t = gen::tree_traffic(6, &mut rng);
        let g_t = t.demand_graph();
        let setting = gen::uniform_setting(t).unwrap();
        let report = pos_poa(&setting).unwrap();
        assert_eq!(report.pne_count, 1);
        assert_eq!(report.best_pne, g_t);
        assert_eq!(report.pos, 1.0);
        assert_eq!(report.poa, 1.0);
    }

    #[test]
    fn lower_sc_thresholds_around_optimum() {
        let t = gen::all_to_all_traffic(4, 1.0);
        let setting = gen::uniform_setting(t).unwrap();
        let (opt, sc_opt) = optimal_topology(&setting).unwrap();
        assert!(decide_lower_sc(&setting, sc_opt).unwrap().is_some());
        assert!(decide_lower_sc(&setting, sc_opt - 1.0).unwrap().is_none());
        let report = pos_poa(&setting).unwrap();
        let lsce = decide_lower_sc_equilibrium(&setting, report.best_pne_sc)
            .unwrap()
            .expect("best PNE qualifies");
        assert_eq!(social_cost(&setting, &lsce), report.best_pne_sc);
        drop(opt);
    }
}
