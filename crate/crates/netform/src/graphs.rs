//! Small-graph utilities: labeled-graph enumeration by edge mask, forest and
//! spanning-forest enumeration, and random graph generators. Everything here
//! targets desk-scale instances; enumerators refuse node counts whose mask
//! space would not fit the brute-force budget.

use rand::Rng;

use crate::model::{NodeId, Topology};

/// Union-find over `0..n` with path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    groups: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            groups: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        self.groups -= 1;
        true
    }

    pub fn groups(&self) -> usize {
        self.groups
    }
}

/// All unordered pairs on `0..n` in lexicographic order; bit `k` of an edge
/// mask refers to `edge_list(n)[k]`.
pub fn edge_list(n: usize) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((NodeId(i as u32), NodeId(j as u32)));
        }
    }
    out
}

/// Iterator over all edge masks of labeled graphs on `n` nodes.
pub fn all_edge_masks(n: usize) -> impl Iterator<Item = u64> {
    let bits = n * (n - 1) / 2;
    assert!(bits < 63, "mask enumeration needs n(n-1)/2 < 63");
    0..(1u64 << bits)
}

pub fn topology_from_mask(n: usize, mask: u64) -> Topology {
    let edges = edge_list(n);
    let mut g = Topology::new(n);
    for (k, &(i, j)) in edges.iter().enumerate() {
        if mask >> k & 1 == 1 {
            g.add_edge(i, j).expect("mask edges are distinct");
        }
    }
    g
}

pub fn mask_from_topology(g: &Topology) -> u64 {
    let edges = edge_list(g.node_count());
    let mut mask = 0u64;
    for (k, &(i, j)) in edges.iter().enumerate() {
        if g.has_edge(i, j) {
            mask |= 1 << k;
        }
    }
    mask
}

/// Masks of all forests (acyclic subgraphs) on `n` labeled nodes, ascending.
pub fn forest_masks(n: usize) -> Vec<u64> {
    let edges = edge_list(n);
    let mut out = Vec::new();
    // Depth-first over edge decisions, extending a partial forest.
    fn rec(
        edges: &[(NodeId, NodeId)],
        k: usize,
        mask: u64,
        uf: &mut UnionFind,
        out: &mut Vec<u64>,
    ) {
        if k == edges.len() {
            out.push(mask);
            return;
        }
        rec(edges, k + 1, mask, uf, out);
        let (i, j) = edges[k];
        let mut with = uf.clone();
        if with.union(i.index(), j.index()) {
            rec(edges, k + 1, mask | 1 << k, &mut with, out);
        }
    }
    let mut uf = UnionFind::new(n);
    rec(&edges, 0, 0, &mut uf, &mut out);
    out.sort_unstable();
    out
}

/// All spanning forests of `g`: maximal acyclic subgraphs, i.e. spanning
/// trees of every component.
pub fn spanning_forests(g: &Topology) -> Vec<Topology> {
    let n = g.node_count();
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let target = n - g.component_count();
    let mut out = Vec::new();
    fn rec(
        n: usize,
        edges: &[(NodeId, NodeId)],
        k: usize,
        chosen: &mut Vec<(NodeId, NodeId)>,
        uf: &mut UnionFind,
        target: usize,
        out: &mut Vec<Topology>,
    ) {
        if chosen.len() == target {
            out.push(Topology::with_edges(n, chosen.iter().copied()).expect("acyclic set"));
            return;
        }
        if k == edges.len() || chosen.len() + (edges.len() - k) < target {
            return;
        }
        let (i, j) = edges[k];
        let mut with = uf.clone();
        if with.union(i.index(), j.index()) {
            chosen.push((i, j));
            rec(n, edges, k + 1, chosen, &mut with, target, out);
            chosen.pop();
        }
        rec(n, edges, k + 1, chosen, uf, target, out);
    }
    let mut uf = UnionFind::new(n);
    rec(n, &edges, 0, &mut Vec::new(), &mut uf, target, &mut out);
    out
}

/// Uniform-ish random subgraph: each pair becomes an edge with probability
/// `density`.
pub fn random_topology<R: Rng>(n: usize, density: f64, rng: &mut R) -> Topology {
    let mut g = Topology::new(n);
    for (i, j) in edge_list(n) {
        if rng.random_bool(density) {
            g.add_edge(i, j).unwrap();
        }
    }
    g
}

/// Uniform random labeled tree on `n >= 1` nodes via a Pruefer sequence.
pub fn random_spanning_tree<R: Rng>(n: usize, rng: &mut R) -> Topology {
    let mut g = Topology::new(n);
    if n <= 1 {
        return g;
    }
    if n == 2 {
        g.add_edge(NodeId(0), NodeId(1)).unwrap();
        return g;
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &v in &seq {
        degree[v] += 1;
    }
    let mut seq_iter = seq.iter();
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    for &v in seq_iter.by_ref() {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("tree invariant");
        g.add_edge(NodeId(leaf as u32), NodeId(v as u32)).unwrap();
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.push(std::cmp::Reverse(v));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().unwrap();
    let std::cmp::Reverse(b) = leaves.pop().unwrap();
    g.add_edge(NodeId(a as u32), NodeId(b as u32)).unwrap();
    g
}

/// Uniform random forest-ish subgraph: a random spanning tree with each edge
/// kept with probability `keep`.
pub fn random_forest<R: Rng>(n: usize, keep: f64, rng: &mut R) -> Topology {
    let tree = random_spanning_tree(n, rng);
    let mut g = Topology::new(n);
    for (i, j) in tree.edges() {
        if rng.random_bool(keep) {
            g.add_edge(i, j).unwrap();
        }
    }
    g
}
