//! Hardness reductions as instance generators, proving nothing: each
//! construction is cross-checked against the brute-force deciders below at
//! desk scale. Reduced instances carry exact integer traffic and thresholds
//! so `SC <= C` decisions are bit-exact.

use std::sync::Arc;

use crate::best_response::BRInstance;
use crate::contracting::{ConstantRule, DefaultRule};
use crate::error::{Error, Result};
use crate::model::{Beta, Configuration, GameSetting, NodeId, Topology, TrafficMatrix};

/// An EXACT 3-COVER instance: terminals `0..terminal_count` and 3-element
/// subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct X3CInstance {
    terminal_count: usize,
    triples: Vec<[usize; 3]>,
}

impl X3CInstance {
    pub fn new(terminal_count: usize, triples: Vec<[usize; 3]>) -> Result<Self> {
        if terminal_count % 3 != 0 {
            return Err(Error::MalformedInstance(format!(
                "terminal count {terminal_count} is not a multiple of 3"
            )));
        }
        let mut normalized: Vec<[usize; 3]> = Vec::with_capacity(triples.len());
        for mut triple in triples {
            triple.sort_unstable();
            if triple[0] == triple[1] || triple[1] == triple[2] {
                return Err(Error::MalformedInstance(format!(
                    "triple {triple:?} has repeated elements"
                )));
            }
            if triple[2] >= terminal_count {
                return Err(Error::MalformedInstance(format!(
                    "triple {triple:?} references a terminal out of range"
                )));
            }
            if normalized.contains(&triple) {
                return Err(Error::MalformedInstance(format!(
                    "duplicate triple {triple:?}"
                )));
            }
            normalized.push(triple);
        }
        Ok(X3CInstance {
            terminal_count,
            triples: normalized,
        })
    }

    pub fn terminal_count(&self) -> usize {
        self.terminal_count
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.triples
    }
}

/// X3C restricted to triple families with pairwise intersections of at most
/// one element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RX3CInstance {
    inner: X3CInstance,
}

impl RX3CInstance {
    pub fn new(inner: X3CInstance) -> Result<Self> {
        for (a, sa) in inner.triples.iter().enumerate() {
            for sb in inner.triples.iter().skip(a + 1) {
                let shared = sa.iter().filter(|x| sb.contains(x)).count();
                if shared > 1 {
                    return Err(Error::MalformedInstance(format!(
                        "triples {sa:?} and {sb:?} share {shared} elements"
                    )));
                }
            }
        }
        Ok(RX3CInstance { inner })
    }

    pub fn terminal_count(&self) -> usize {
        self.inner.terminal_count
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.inner.triples
    }

    pub fn as_x3c(&self) -> &X3CInstance {
        &self.inner
    }
}

/// INDEPENDENT SET -> BEST RESPONSE: a star whose center `u` collects a
/// fixed transfer from every leaf while source-graph edges become heavy leaf
/// traffic routed through the center, so keeping a non-independent leaf set
/// drives the center's utility strictly negative. `u`'s best response equals
/// the maximum independent set size of the source graph.
///
/// The source uses nodes `0..m` as leaves and `m` as the center; each source
/// edge `vw` carries `m + 1` units in both directions.
pub fn reduce_is_to_br(graph: &Topology, threshold: usize) -> Result<BRInstance> {
    let m = graph.node_count();
    if threshold > m {
        return Err(Error::MalformedInstance(format!(
            "threshold {threshold} exceeds {m} source vertices"
        )));
    }
    let n = m + 1;
    let center = NodeId(m as u32);
    let heavy = (m + 1) as f64;
    let mut traffic = TrafficMatrix::new(n);
    for (v, w) in graph.edges() {
        traffic.set(v, w, heavy)?;
        traffic.set(w, v, heavy)?;
    }
    let setting = GameSetting::new(
        1.0,
        vec![1.0; n],
        traffic,
        Arc::new(ConstantRule::new(2.0)),
        Beta::Auto,
    )?;

    let mut config = Configuration::empty(n);
    for v in 0..m {
        let leaf = NodeId(v as u32);
        config.topology.add_edge(leaf, center)?;
        config.contracts.insert(leaf, center)?;
        let q = setting.contract_value(leaf, center, &config.topology);
        config.payments.set(leaf, center, q);
    }
    config.validate()?;
    Ok(BRInstance {
        setting,
        config,
        node: center,
        threshold: threshold as f64,
    })
}

/// X3C -> RX3C: pads each source triple with six fresh terminals so every
/// pair of output triples overlaps in at most one element, preserving the
/// cover answer.
pub fn reduce_x3c_to_rx3c(instance: &X3CInstance) -> RX3CInstance {
    let t3 = instance.terminal_count;
    let s = instance.triples.len();
    // Fresh terminals: #_{i,j} = t3 + 6i + j, #'_{i,j} = t3 + 6i + 3 + j.
    let sharp = |i: usize, j: usize| t3 + 6 * i + j;
    let sharp2 = |i: usize, j: usize| t3 + 6 * i + 3 + j;
    let mut triples = Vec::with_capacity(5 * s);
    for (i, sigma) in instance.triples.iter().enumerate() {
        for j in 0..3 {
            triples.push([sharp(i, j), sharp2(i, j), sigma[j]]);
        }
        triples.push([sharp(i, 0), sharp(i, 1), sharp(i, 2)]);
        triples.push([sharp2(i, 0), sharp2(i, 1), sharp2(i, 2)]);
    }
    let inner = X3CInstance::new(t3 + 6 * s, triples).expect("padding terminals are fresh");
    RX3CInstance::new(inner).expect("padded triples pairwise share at most one element")
}

/// Node layout shared by the welfare reductions.
#[derive(Clone, Copy, Debug)]
pub struct LsceLayout {
    pub s: usize,
    pub t: usize,
}

impl LsceLayout {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }
    pub fn triple_node(&self, i: usize) -> NodeId {
        NodeId((1 + i) as u32)
    }
    pub fn terminal_node(&self, j: usize) -> NodeId {
        NodeId((1 + self.s + j) as u32)
    }
    pub fn node_count(&self) -> usize {
        1 + self.s + 3 * self.t
    }
}

fn cover_shape(instance: &RX3CInstance) -> Result<(usize, usize)> {
    let s = instance.triples().len();
    let t = instance.terminal_count() / 3;
    if s == 0 || t == 0 {
        return Err(Error::MalformedInstance(
            "welfare reductions need at least one triple and one terminal block".into(),
        ));
    }
    if s < t {
        return Err(Error::MalformedInstance(format!(
            "{s} triples cannot cover {t} terminal blocks; the traffic constants degenerate"
        )));
    }
    Ok((s, t))
}

/// Traffic constants of the LOWER SC EQUILIBRIUM reduction.
///
/// The magnitudes keep the paper's shape — the terminal-terminal budget
/// feeds `k'`, which feeds `k` — so each layer of demand dominates the ones
/// below it. The threshold is the exact social cost of the witness tree
/// `G(S')` under this cost model (unique shortest paths make it an
/// integer): maintenance `2(s+3t)`, root demand `2sk`, triple-to-terminal
/// demand `6k'(2s-t)`, terminal pairs `3(5s-2t)`.
pub fn lsce_constants(s: usize, t: usize) -> (f64, f64, f64) {
    let (s, t) = (s as f64, t as f64);
    let k_prime = 4.0 * (6.0 * s - 3.0 * t);
    let k = 6.0 * k_prime * (3.0 * s - 2.0 * t) + k_prime;
    let threshold =
        2.0 * (s + 3.0 * t) + 2.0 * s * k + 6.0 * k_prime * (2.0 * s - t) + 3.0 * (5.0 * s - 2.0 * t);
    (k, k_prime, threshold)
}

/// RX3C -> LOWER SC EQUILIBRIUM. Nodes: root, one per triple, one per
/// terminal. The root demands `k` from every triple node, each triple node
/// demands `k'` from its three terminals, and terminals sharing a triple
/// exchange one unit. Exactly the trees `G(S')` of exact covers reach the
/// returned threshold.
pub fn reduce_rx3c_to_lsce(instance: &RX3CInstance) -> Result<(GameSetting, f64)> {
    let (s, t) = cover_shape(instance)?;
    let layout = LsceLayout { s, t };
    let (k, k_prime, threshold) = lsce_constants(s, t);
    let mut traffic = TrafficMatrix::new(layout.node_count());
    for i in 0..s {
        traffic.set(layout.root(), layout.triple_node(i), k)?;
        for &term in &instance.triples()[i] {
            traffic.set(layout.triple_node(i), layout.terminal_node(term), k_prime)?;
        }
        let tri = instance.triples()[i];
        for a in 0..3 {
            for b in (a + 1)..3 {
                traffic.set(layout.terminal_node(tri[a]), layout.terminal_node(tri[b]), 1.0)?;
            }
        }
    }
    let setting = GameSetting::new(
        1.0,
        vec![1.0; layout.node_count()],
        traffic,
        Arc::new(DefaultRule::default()),
        Beta::Auto,
    )?;
    Ok((setting, threshold))
}

/// The witness tree `G(S')` of a (purported) cover: the root links to every
/// triple node, and covering triples link to their terminals.
pub fn lsce_witness_topology(instance: &RX3CInstance, cover: &[usize]) -> Result<Topology> {
    let (s, t) = cover_shape(instance)?;
    let layout = LsceLayout { s, t };
    let mut g = Topology::new(layout.node_count());
    for i in 0..s {
        g.add_edge(layout.root(), layout.triple_node(i))?;
    }
    for &i in cover {
        for &term in &instance.triples()[i] {
            g.add_edge(layout.triple_node(i), layout.terminal_node(term))?;
        }
    }
    Ok(g)
}

/// Node layout of the LOWER SC reduction (no root).
#[derive(Clone, Copy, Debug)]
pub struct LscLayout {
    pub s: usize,
    pub t: usize,
}

impl LscLayout {
    pub fn triple_node(&self, i: usize) -> NodeId {
        NodeId(i as u32)
    }
    pub fn terminal_node(&self, j: usize) -> NodeId {
        NodeId((self.s + j) as u32)
    }
    pub fn node_count(&self) -> usize {
        self.s + 3 * self.t
    }
}

/// Traffic constants of the LOWER SC reduction: `k'' = 1`, `k'` equals the
/// terminal-pair budget, the link price carries the whole sub-`k` budget,
/// and `k` dominates everything. The threshold is again the exact witness
/// social cost: maintenance `pi (s^2 - s + 6t)`, triple pairs `k (s^2 - s)`,
/// triple-to-terminal `3k'(3s - t)`, terminal pairs `3(4s - t)`.
pub fn lsc_constants(s: usize, t: usize) -> (f64, f64, f64, f64) {
    let (s, t) = (s as f64, t as f64);
    let c_tt = 6.0 * (3.0 * s - t);
    let k_prime = c_tt;
    let c_st = 6.0 * k_prime * (2.0 * s - t);
    let pi = c_st + c_tt;
    let k = pi * (1.0 + 6.0 * t + s * s);
    let threshold = pi * (s * s - s + 6.0 * t)
        + k * (s * s - s)
        + 3.0 * k_prime * (3.0 * s - t)
        + 3.0 * (4.0 * s - t);
    (k, k_prime, pi, threshold)
}

/// RX3C -> LOWER SC. No root: triple nodes exchange `k` pairwise, demand
/// `k'` from their terminals, and terminals sharing a triple exchange one
/// unit. The optimal topology must make the triple nodes a clique and hang
/// every terminal off a covering triple; only exact covers reach the
/// threshold.
pub fn reduce_rx3c_to_lsc(instance: &RX3CInstance) -> Result<(GameSetting, f64)> {
    let (s, t) = cover_shape(instance)?;
    let layout = LscLayout { s, t };
    let (k, k_prime, pi, threshold) = lsc_constants(s, t);
    let mut traffic = TrafficMatrix::new(layout.node_count());
    for i in 0..s {
        for j in (i + 1)..s {
            traffic.set(layout.triple_node(i), layout.triple_node(j), k)?;
        }
        for &term in &instance.triples()[i] {
            traffic.set(layout.triple_node(i), layout.terminal_node(term), k_prime)?;
        }
        let tri = instance.triples()[i];
        for a in 0..3 {
            for b in (a + 1)..3 {
                traffic.set(layout.terminal_node(tri[a]), layout.terminal_node(tri[b]), 1.0)?;
            }
        }
    }
    let setting = GameSetting::new(
        pi,
        vec![1.0; layout.node_count()],
        traffic,
        Arc::new(DefaultRule::default()),
        Beta::Auto,
    )?;
    Ok((setting, threshold))
}

/// The witness graph of the LOWER SC reduction: a clique on the triple
/// nodes plus covering-triple-to-terminal links.
pub fn lsc_witness_topology(instance: &RX3CInstance, cover: &[usize]) -> Result<Topology> {
    let (s, t) = cover_shape(instance)?;
    let layout = LscLayout { s, t };
    let mut g = Topology::new(layout.node_count());
    for i in 0..s {
        for j in (i + 1)..s {
            g.add_edge(layout.triple_node(i), layout.triple_node(j))?;
        }
    }
    for &i in cover {
        for &term in &instance.triples()[i] {
            g.add_edge(layout.triple_node(i), layout.terminal_node(term))?;
        }
    }
    Ok(g)
}

/// Exhaustive maximum independent set, `|V| <= 20`.
pub fn brute_independent_set(graph: &Topology) -> Result<usize> {
    let n = graph.node_count();
    if n > 20 {
        return Err(Error::SizeBound { n, bound: 20 });
    }
    let mut adj = vec![0u32; n];
    for (u, v) in graph.edges() {
        adj[u.index()] |= 1 << v.index();
        adj[v.index()] |= 1 << u.index();
    }
    fn mis(remaining: u32, adj: &[u32]) -> usize {
        if remaining == 0 {
            return 0;
        }
        let v = remaining.trailing_zeros() as usize;
        let without = mis(remaining & !(1 << v), adj);
        let with = 1 + mis(remaining & !(1 << v) & !adj[v], adj);
        without.max(with)
    }
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    Ok(mis(all, &adj))
}

/// Exhaustive exact-cover existence, at most 20 triples and 64 terminals.
pub fn brute_exact_cover(instance: &X3CInstance) -> Result<bool> {
    let s = instance.triples.len();
    if s > 20 {
        return Err(Error::SizeBound { n: s, bound: 20 });
    }
    if instance.terminal_count > 64 {
        return Err(Error::SizeBound {
            n: instance.terminal_count,
            bound: 64,
        });
    }
    let masks: Vec<u64> = instance
        .triples
        .iter()
        .map(|t| t.iter().fold(0u64, |m, &x| m | 1 << x))
        .collect();
    let full = if instance.terminal_count == 64 {
        u64::MAX
    } else {
        (1u64 << instance.terminal_count) - 1
    };
    fn cover(remaining: u64, masks: &[u64]) -> bool {
        if remaining == 0 {
            return true;
        }
        let lowest = remaining & remaining.wrapping_neg();
        masks
            .iter()
            .any(|&m| m & lowest != 0 && m & !remaining == 0 && cover(remaining & !m, masks))
    }
    Ok(cover(full, &masks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::is_pne_topology;
    use crate::welfare;
    use num_rational::BigRational;

    fn x3c(t3: usize, triples: &[[usize; 3]]) -> X3CInstance {
        X3CInstance::new(t3, triples.to_vec()).unwrap()
    }

    #[test]
    fn brute_deciders_on_small_facts() {
        let k3 = crate::graphs::topology_from_mask(3, 0b111);
        assert_eq!(brute_independent_set(&k3).unwrap(), 1);
        let c4 = Topology::with_edges(
            4,
            [(0u32, 1u32), (1, 2), (2, 3), (0, 3)]
                .map(|(a, b)| (NodeId(a), NodeId(b))),
        )
        .unwrap();
        assert_eq!(brute_independent_set(&c4).unwrap(), 2);

        let no = x3c(6, &[[0, 1, 2], [2, 3, 4], [0, 3, 5]]);
        assert!(!brute_exact_cover(&no).unwrap());
        let yes = x3c(6, &[[0, 1, 2], [3, 4, 5]]);
        assert!(brute_exact_cover(&yes).unwrap());
        let empty = x3c(3, &[]);
        assert!(!brute_exact_cover(&empty).unwrap());
    }

    #[test]
    fn x3c_to_rx3c_bounds_intersections_and_preserves_answers() {
        let yes = x3c(3, &[[0, 1, 2]]);
        let out = reduce_x3c_to_rx3c(&yes);
        assert_eq!(out.terminal_count(), 9);
        assert_eq!(out.triples().len(), 5);
        assert_eq!(
            brute_exact_cover(&yes).unwrap(),
            brute_exact_cover(out.as_x3c()).unwrap()
        );

        let no = x3c(3, &[]);
        let out = reduce_x3c_to_rx3c(&no);
        assert_eq!(
            brute_exact_cover(&no).unwrap(),
            brute_exact_cover(out.as_x3c()).unwrap()
        );
    }

    #[test]
    fn lsce_unit_instance_constants() {
        let (k, k_prime, c) = lsce_constants(1, 1);
        assert_eq!(k_prime, 12.0);
        assert_eq!(k, 84.0);
        assert_eq!(c, 257.0);
    }

    #[test]
    fn lsce_witness_cost_is_exactly_the_threshold() {
        let instance = RX3CInstance::new(x3c(3, &[[0, 1, 2]])).unwrap();
        let (setting, c) = reduce_rx3c_to_lsce(&instance).unwrap();
        let witness = lsce_witness_topology(&instance, &[0]).unwrap();
        let exact = welfare::social_cost_exact(&setting, &witness);
        assert_eq!(exact, BigRational::from_float(c).unwrap());
        assert!(is_pne_topology(&witness, setting.traffic()).is_pne());
    }

    #[test]
    fn lsc_witness_cost_is_exactly_the_threshold() {
        let instance = RX3CInstance::new(x3c(3, &[[0, 1, 2]])).unwrap();
        let (setting, c) = reduce_rx3c_to_lsc(&instance).unwrap();
        let witness = lsc_witness_topology(&instance, &[0]).unwrap();
        let exact = welfare::social_cost_exact(&setting, &witness);
        assert_eq!(exact, BigRational::from_float(c).unwrap());
        // Validates the constants end to end on the 4-node instance.
        let found = welfare::decide_lower_sc(&setting, c).unwrap().unwrap();
        assert_eq!(welfare::social_cost(&setting, &found), c);
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        let too_few = RX3CInstance::new(x3c(6, &[[0, 1, 2]])).unwrap();
        assert!(reduce_rx3c_to_lsce(&too_few).is_err());
        let empty = RX3CInstance::new(x3c(3, &[])).unwrap();
        assert!(reduce_rx3c_to_lsce(&empty).is_err());
    }

    #[test]
    fn rx3c_validation_rejects_large_overlaps() {
        let bad = X3CInstance::new(6, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert!(RX3CInstance::new(bad).is_err());
    }
}
