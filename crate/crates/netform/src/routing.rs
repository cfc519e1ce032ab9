//! Shortest-path routing with equal splitting.
//!
//! `f(i; G)` sums, over every ordered demand pair `(s, t)` connected in `G`,
//! the demand times the fraction of shortest `s -> t` paths through `i`,
//! endpoints included. Demand between disconnected pairs contributes nothing
//! here; it is priced through the disconnection cost instead.
//!
//! The loads are computed by the standard two-pass counting scheme: path
//! counts forward in BFS order, weighted dependencies accumulated backward.
//! The same pass runs in `f64` (default) or exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::model::{NodeId, Topology, TrafficMatrix};

/// Arithmetic the two-pass accumulation runs in.
pub(crate) trait Scalar: Clone {
    fn zero() -> Self;
    fn from_f64(v: f64) -> Self;
    fn from_count(c: u128) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_count(c: u128) -> Self {
        c as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite demand")
    }
    fn from_count(c: u128) -> Self {
        BigRational::from_integer(BigInt::from(c))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

fn loads_generic<S: Scalar>(adj: &[Vec<usize>], traffic: &TrafficMatrix) -> Vec<S> {
    let n = adj.len();
    let mut loads = vec![S::zero(); n];
    let mut dist = vec![-1i64; n];
    let mut sigma = vec![0u128; n];
    let mut order = Vec::with_capacity(n);
    let mut target_weight: Vec<f64> = vec![0.0; n];

    for s in 0..n {
        let source = NodeId(s as u32);
        let mut has_demand = false;
        for w in target_weight.iter_mut() {
            *w = 0.0;
        }
        for (t, w) in traffic.demands_from(source) {
            target_weight[t.index()] = w;
            has_demand = true;
        }
        if !has_demand {
            continue;
        }

        dist.fill(-1);
        sigma.fill(0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1;
        order.push(s);
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    order.push(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }

        // delta[v] = sum over reachable targets t strictly below v of
        // t_st * sigma_st(v) / sigma_st.
        let mut delta = vec![S::zero(); n];
        let mut source_total = S::zero();
        for &v in order.iter().rev() {
            if v == s {
                continue;
            }
            let mut acc = delta[v].clone();
            let w_v = target_weight[v];
            if w_v > 0.0 {
                acc = acc.add(&S::from_f64(w_v));
                source_total = source_total.add(&S::from_f64(w_v));
            }
            loads[v] = loads[v].add(&acc);
            // Push the accumulated share to shortest-path predecessors.
            for &u in &adj[v] {
                if dist[u] == dist[v] - 1 {
                    let frac = S::from_count(sigma[u]).div(&S::from_count(sigma[v]));
                    delta[u] = delta[u].add(&frac.mul(&acc));
                }
            }
        }
        loads[s] = loads[s].add(&source_total);
    }
    loads
}

/// Transit load of every node, double precision.
pub fn transit_loads(topology: &Topology, traffic: &TrafficMatrix) -> Vec<f64> {
    loads_generic(&topology.adjacency(), traffic)
}

/// Transit load of one node. Computes all loads; prefer [`transit_loads`]
/// when several are needed.
pub fn transit_load(topology: &Topology, traffic: &TrafficMatrix, i: NodeId) -> f64 {
    transit_loads(topology, traffic)[i.index()]
}

/// Exact rational transit loads. Demands are converted from `f64` exactly.
pub fn transit_loads_exact(topology: &Topology, traffic: &TrafficMatrix) -> Vec<BigRational> {
    loads_generic(&topology.adjacency(), traffic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use num_traits::ToPrimitive;

    fn topo(n: usize, edges: &[(u32, u32)]) -> Topology {
        Topology::with_edges(n, edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap()
    }

    #[test]
    fn path_demand_loads_every_node_on_it() {
        let g = topo(3, &[(0, 1), (1, 2)]);
        let mut t = TrafficMatrix::new(3);
        t.set(NodeId(0), NodeId(2), 4.0).unwrap();
        assert_eq!(transit_loads(&g, &t), vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn four_cycle_splits_equally() {
        // a-b-c-d-a with t_ac = 2: the two shortest paths a-b-c and a-d-c
        // each carry one unit.
        let g = topo(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let mut t = TrafficMatrix::new(4);
        t.set(NodeId(0), NodeId(2), 2.0).unwrap();
        let f = transit_loads(&g, &t);
        assert_eq!(f, vec![2.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_traffic_zero_loads() {
        let g = topo(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let t = TrafficMatrix::new(4);
        assert_eq!(transit_loads(&g, &t), vec![0.0; 4]);
    }

    #[test]
    fn disconnected_pairs_contribute_nothing() {
        let g = topo(4, &[(0, 1), (2, 3)]);
        let mut t = TrafficMatrix::new(4);
        t.set(NodeId(0), NodeId(3), 5.0).unwrap();
        t.set(NodeId(0), NodeId(1), 1.0).unwrap();
        assert_eq!(transit_loads(&g, &t), vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_path_enumeration_oracle_on_small_graphs() {
        // 2x3 grid plus a chord, several demands with multiple equal-length
        // routes.
        let g = topo(6, &[(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5), (0, 4)]);
        let mut t = TrafficMatrix::new(6);
        t.set(NodeId(0), NodeId(5), 3.0).unwrap();
        t.set(NodeId(2), NodeId(3), 2.0).unwrap();
        t.set(NodeId(5), NodeId(0), 1.0).unwrap();
        t.set(NodeId(1), NodeId(4), 0.5).unwrap();
        let fast = transit_loads(&g, &t);
        let slow = oracles::transit_loads_by_enumeration(&g, &t);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_loads_agree_with_f64() {
        let g = topo(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let mut t = TrafficMatrix::new(5);
        t.set(NodeId(0), NodeId(3), 7.0).unwrap();
        t.set(NodeId(4), NodeId(1), 2.0).unwrap();
        let approx = transit_loads(&g, &t);
        let exact = transit_loads_exact(&g, &t);
        for (a, b) in approx.iter().zip(exact.iter()) {
            assert!((a - b.to_f64().unwrap()).abs() < 1e-12);
        }
    }
}
