//! Instance generators for experiments and tests: traffic patterns and a few
//! named topologies.

use rand::Rng;

use crate::contracting::DefaultRule;
use crate::error::Result;
use crate::graphs;
use crate::model::{Beta, GameSetting, NodeId, Topology, TrafficMatrix};

/// Unit pi and routing costs, default contracting, automatic beta.
pub fn uniform_setting(traffic: TrafficMatrix) -> Result<GameSetting> {
    let n = traffic.node_count();
    GameSetting::new(
        1.0,
        vec![1.0; n],
        traffic,
        std::sync::Arc::new(DefaultRule::default()),
        Beta::Auto,
    )
}

/// `t_ij = weight` for every ordered pair.
pub fn all_to_all_traffic(n: usize, weight: f64) -> TrafficMatrix {
    let mut t = TrafficMatrix::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t.set(NodeId(i as u32), NodeId(j as u32), weight).unwrap();
            }
        }
    }
    t
}

/// Each ordered pair gets an integer demand in `1..=max_units` with
/// probability `density`.
pub fn random_traffic<R: Rng>(
    n: usize,
    density: f64,
    max_units: u32,
    rng: &mut R,
) -> TrafficMatrix {
    let mut t = TrafficMatrix::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                let units = rng.random_range(1..=max_units) as f64;
                t.set(NodeId(i as u32), NodeId(j as u32), units).unwrap();
            }
        }
    }
    t
}

/// Demand along a uniform random spanning tree: each tree edge carries an
/// integer demand in `1..=3`, in a random direction, so `G_T` is a tree.
pub fn tree_traffic<R: Rng>(n: usize, rng: &mut R) -> TrafficMatrix {
    let tree = graphs::random_spanning_tree(n, rng);
    let mut t = TrafficMatrix::new(n);
    for (i, j) in tree.edges() {
        let units = rng.random_range(1..=3) as f64;
        if rng.random_bool(0.5) {
            t.set(i, j, units).unwrap();
        } else {
            t.set(j, i, units).unwrap();
        }
    }
    t
}

/// Star with the given center.
pub fn star_topology(n: usize, center: NodeId) -> Result<Topology> {
    let mut g = Topology::new(n);
    for i in 0..n {
        let v = NodeId(i as u32);
        if v != center {
            g.add_edge(center, v)?;
        }
    }
    Ok(g)
}

/// Path `0-1-...-(n-1)`.
pub fn path_topology(n: usize) -> Topology {
    let mut g = Topology::new(n);
    for i in 1..n {
        g.add_edge(NodeId((i - 1) as u32), NodeId(i as u32)).unwrap();
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tree_traffic_demand_graph_is_a_spanning_tree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for n in 2..8 {
            let t = tree_traffic(n, &mut rng);
            let g_t = t.demand_graph();
            assert!(g_t.is_forest());
            assert_eq!(g_t.edge_count(), n - 1);
            assert_eq!(g_t.component_count(), 1);
        }
    }

    #[test]
    fn all_to_all_is_complete() {
        let t = all_to_all_traffic(4, 1.0);
        assert_eq!(t.demand_graph().edge_count(), 6);
        assert_eq!(t.total(), 12.0);
    }
}
