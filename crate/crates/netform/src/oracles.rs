//! Independent brute-force oracles used by the test suites. These stay
//! deliberately naive — explicit path enumeration, exhaustive forest
//! enumeration — and must not share code with the implementation paths they
//! check.

use std::collections::VecDeque;

use crate::graphs;
use crate::model::{NodeId, Topology, TrafficMatrix};

/// Every shortest path between `s` and `t`, as node sequences.
pub fn enumerate_shortest_paths(g: &Topology, s: NodeId, t: NodeId) -> Vec<Vec<usize>> {
    let adj = g.adjacency();
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    dist[s.index()] = 0;
    let mut queue = VecDeque::from([s.index()]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[t.index()] == usize::MAX {
        return Vec::new();
    }
    let mut paths = Vec::new();
    let mut current = vec![s.index()];
    fn extend(
        adj: &[Vec<usize>],
        dist: &[usize],
        t: usize,
        current: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
    ) {
        let v = *current.last().unwrap();
        if v == t {
            paths.push(current.clone());
            return;
        }
        for &w in &adj[v] {
            if dist[w] == dist[v] + 1 {
                current.push(w);
                extend(adj, dist, t, current, paths);
                current.pop();
            }
        }
    }
    extend(&adj, &dist, t.index(), &mut current, &mut paths);
    paths
}

/// Transit loads by explicit shortest-path enumeration: each demand is split
/// equally over its shortest paths, and every node on a path (endpoints
/// included) accrues the path's share.
pub fn transit_loads_by_enumeration(g: &Topology, traffic: &TrafficMatrix) -> Vec<f64> {
    let mut loads = vec![0.0; g.node_count()];
    for (s, t, demand) in traffic.demands() {
        let paths = enumerate_shortest_paths(g, s, t);
        if paths.is_empty() {
            continue;
        }
        let share = demand / paths.len() as f64;
        for path in &paths {
            for &v in path {
                loads[v] += share;
            }
        }
    }
    loads
}

/// Maximum number of non-participant edges over all spanning forests of `g`,
/// by exhaustive enumeration.
pub fn max_non_participant_forest_edges(g: &Topology, traffic: &TrafficMatrix) -> usize {
    graphs::spanning_forests(g)
        .iter()
        .map(|forest| {
            forest
                .edges()
                .filter(|&(u, v)| !traffic.are_participants(u, v))
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// Sum over connected demands of `t_st * (dist(s, t) + 1)`: the node-visit
/// total that the transit loads must add up to.
pub fn total_node_visits(g: &Topology, traffic: &TrafficMatrix) -> f64 {
    let adj = g.adjacency();
    let n = adj.len();
    let mut total = 0.0;
    for (s, t, demand) in traffic.demands() {
        let mut dist = vec![usize::MAX; n];
        dist[s.index()] = 0;
        let mut queue = VecDeque::from([s.index()]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        if dist[t.index()] != usize::MAX {
            total += demand * (dist[t.index()] + 1) as f64;
        }
    }
    total
}
