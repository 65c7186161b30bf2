//! Directed multigraphs, quotients, weak components and the bridge decomposition.

use serde::{Deserialize, Serialize};

use super::partition::{Partition, UnionFind};
use crate::error::{Error, Result};

/// A finite directed multigraph on vertices `0..vertex_count`.
///
/// Edge `e` is `edges[e] = (source, target)`. Parallel edges and self-loops are allowed;
/// edge ids are positions in `edges` and are never renumbered by quotients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl DiGraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(s, t)) = edges
            .iter()
            .find(|&&(s, t)| s >= vertex_count || t >= vertex_count)
        {
            return Err(Error::InvalidInput(format!(
                "edge ({s},{t}) out of range for {vertex_count} vertices"
            )));
        }
        Ok(DiGraph {
            vertex_count,
            edges,
        })
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Self {
        DiGraph {
            vertex_count: n,
            edges: (0..n).map(|i| (i, (i + 1) % n)).collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source(&self, e: usize) -> usize {
        self.edges[e].0
    }

    pub fn target(&self, e: usize) -> usize {
        self.edges[e].1
    }

    /// `G / p`: vertices become blocks of `p`, edge ids are preserved.
    /// The vertex map is `v -> p.block_of(v)`.
    pub fn quotient(&self, p: &Partition) -> Result<DiGraph> {
        if p.ground_size() != self.vertex_count {
            return Err(Error::SizeMismatch(format!(
                "partition of {} elements for a graph with {} vertices",
                p.ground_size(),
                self.vertex_count
            )));
        }
        Ok(DiGraph {
            vertex_count: p.block_count(),
            edges: self
                .edges
                .iter()
                .map(|&(s, t)| (p.block_of(s), p.block_of(t)))
                .collect(),
        })
    }

    /// Keeps all vertices and the edges selected by `keep`. Returns the subgraph together
    /// with the original id of each kept edge.
    pub fn restrict(&self, mut keep: impl FnMut(usize) -> bool) -> (DiGraph, Vec<usize>) {
        let ids: Vec<usize> = (0..self.edges.len()).filter(|&e| keep(e)).collect();
        let edges = ids.iter().map(|&e| self.edges[e]).collect();
        (
            DiGraph {
                vertex_count: self.vertex_count,
                edges,
            },
            ids,
        )
    }

    /// Components of the undirection.
    pub fn weak_components(&self) -> Partition {
        let mut uf = UnionFind::new(self.vertex_count);
        for &(s, t) in &self.edges {
            uf.union(s, t);
        }
        uf.partition()
    }

    pub fn component_count(&self) -> usize {
        self.weak_components().block_count()
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.vertex_count > 0 && self.component_count() == 1
    }

    /// The undirection as a multigraph.
    pub fn undirected(&self) -> Multigraph {
        Multigraph {
            vertex_count: self.vertex_count,
            edges: self.edges.clone(),
        }
    }

    pub fn two_edge_decompose(&self) -> TwoEdgeDecomposition {
        two_edge_decompose(&self.undirected())
    }

    /// Connected with no cut edges.
    pub fn is_two_edge_connected(&self) -> bool {
        self.is_weakly_connected() && self.two_edge_decompose().cut_edges.is_empty()
    }
}

/// An undirected multigraph; `edges[e]` is an unordered pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multigraph {
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Multigraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges
            .iter()
            .all(|&(a, b)| a < vertex_count && b < vertex_count));
        Multigraph {
            vertex_count,
            edges,
        }
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertex_count);
        let mut count = self.vertex_count;
        for &(a, b) in &self.edges {
            if uf.union(a, b) {
                count -= 1;
            }
        }
        count
    }

    /// Connected and `|E| = |V| - 1`; parallel edges and loops therefore fail.
    pub fn is_tree(&self) -> bool {
        self.vertex_count > 0
            && self.edges.len() + 1 == self.vertex_count
            && self.component_count() == 1
    }

    pub fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.vertex_count);
        self.edges.iter().all(|&(a, b)| uf.union(a, b))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Free-function form of [`Multigraph::is_tree`].
pub fn is_tree(g: &Multigraph) -> bool {
    g.is_tree()
}

/// Bridges and two-edge-connected components of a multigraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoEdgeDecomposition {
    /// Vertex -> two-edge-connected component id (canonical order of first vertex).
    pub component_of_vertex: Vec<usize>,
    pub component_count: usize,
    /// Cut edges, ascending.
    pub cut_edges: Vec<usize>,
    /// One vertex per component, one edge per cut edge (in `cut_edges` order).
    pub forest: Multigraph,
    /// Total number of leaves of `forest`, an isolated vertex counting as two.
    pub leaf_count: usize,
}

/// Bridge finding by one iterative low-link DFS.
///
/// The DFS skips only the tree edge it arrived by (by id, not by endpoint), so of a pair of
/// parallel edges the second one is a back edge and neither is reported as a bridge.
pub fn bridges(g: &Multigraph) -> Vec<usize> {
    let n = g.vertex_count;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(a, b)) in g.edges.iter().enumerate() {
        if a == b {
            continue;
        }
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut clock = 0;
    let mut out = Vec::new();
    // Stack frames: (vertex, edge used to enter, next adjacency index).
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = clock;
        low[root] = clock;
        clock += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (v, in_edge, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let (w, e) = adj[v][*next];
                *next += 1;
                if e == in_edge {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = clock;
                    low[w] = clock;
                    clock += 1;
                    stack.push((w, e, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        out.push(in_edge);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn two_edge_decompose(g: &Multigraph) -> TwoEdgeDecomposition {
    let cut_edges = bridges(g);
    let mut is_cut = vec![false; g.edges.len()];
    for &e in &cut_edges {
        is_cut[e] = true;
    }
    let mut uf = UnionFind::new(g.vertex_count);
    for (e, &(a, b)) in g.edges.iter().enumerate() {
        if !is_cut[e] {
            uf.union(a, b);
        }
    }
    let comps = uf.partition();
    let component_of_vertex: Vec<usize> = (0..g.vertex_count).map(|v| comps.block_of(v)).collect();
    let forest = Multigraph::new(
        comps.block_count(),
        cut_edges
            .iter()
            .map(|&e| {
                let (a, b) = g.edges[e];
                (component_of_vertex[a], component_of_vertex[b])
            })
            .collect(),
    );
    let leaf_count = forest_leaf_count(&forest);
    TwoEdgeDecomposition {
        component_of_vertex,
        component_count: comps.block_count(),
        cut_edges,
        forest,
        leaf_count,
    }
}

/// Leaves of a forest; an isolated vertex counts as two.
pub fn forest_leaf_count(forest: &Multigraph) -> usize {
    forest
        .degrees()
        .iter()
        .map(|&d| match d {
            0 => 2,
            1 => 1,
            _ => 0,
        })
        .sum()
}
