//! Test digraphs, their traces, and the partition calculus behind traffic moments.
//!
//! A test graph is a directed multigraph whose edges carry matrices. Its trace sums the
//! product `∏_e X_e[i(target), i(source)]` over all vertex labelings `i`, normalized by
//! `dim^{#components}`. The injective trace restricts to injective labelings.

mod fixture;
mod kernel;
mod moments;

pub use fixture::{Claim, ClaimOutcome, NamedBlocks, TrafficFixture, TrafficReport};
pub use kernel::{
    admissible_count, admissible_tuples, analyze, gcc, growth_exponent, h_sc, induced_gcc_walk,
    is_admissible, omega, rho, rhos, t_pi_c, t_pi_s, GccEdge, GccGraph, GccWalk, GrowthExponent,
    MultiPartition, PiAnalysis,
};
pub use moments::{
    expected_trace_exact, expected_trace_leading_terms, for_each_kernel_labeling,
    gamma_empirical, gamma_expected_formula, kernel_labeling_count, lambda_value, LeadingTerm,
    LeadingTerms,
};

use crate::combinatorics::{DiGraph, Partition};
use crate::error::{saturating_pow, Error, GuardKind, Guards, Result};
use crate::model::StringAssignment;
use crate::scalar::{falling_factorial, pow_usize, Scalar};
use crate::tensor::{
    conjugate_by_color, lift, DiagonalMatrix, Matrix, MultiIndexSpace, Permutation,
    StructuredMatrix,
};

/// A directed multigraph with a color on every edge. The unlabeled shape of a test graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredDigraph {
    graph: DiGraph,
    colors: Vec<usize>,
}

impl ColoredDigraph {
    pub fn new(graph: DiGraph, colors: Vec<usize>) -> Result<Self> {
        if colors.len() != graph.edge_count() {
            return Err(Error::SizeMismatch(format!(
                "{} edge colors for {} edges",
                colors.len(),
                graph.edge_count()
            )));
        }
        Ok(ColoredDigraph { graph, colors })
    }

    /// From `(source, target, color)` triples.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, usize)]) -> Result<Self> {
        let graph = DiGraph::new(vertex_count, edges.iter().map(|&(s, t, _)| (s, t)).collect())?;
        Self::new(graph, edges.iter().map(|&(_, _, c)| c).collect())
    }

    pub fn graph(&self) -> &DiGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn color(&self, e: usize) -> usize {
        self.colors[e]
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    /// All vertices, only the edges whose color satisfies `keep`. Returns original edge ids.
    pub fn restrict_colors(&self, mut keep: impl FnMut(usize) -> bool) -> (ColoredDigraph, Vec<usize>) {
        let (graph, ids) = self.graph.restrict(|e| keep(self.colors[e]));
        let colors = ids.iter().map(|&e| self.colors[e]).collect();
        (ColoredDigraph { graph, colors }, ids)
    }

    pub fn quotient(&self, p: &Partition) -> Result<ColoredDigraph> {
        Ok(ColoredDigraph {
            graph: self.graph.quotient(p)?,
            colors: self.colors.clone(),
        })
    }

    pub fn check_colors(&self, a: &StringAssignment) -> Result<()> {
        match self.colors.iter().find(|&&c| c >= a.color_count()) {
            Some(c) => Err(Error::InvalidInput(format!(
                "edge color {c} out of range for {} colors",
                a.color_count()
            ))),
            None => Ok(()),
        }
    }
}

/// A colored digraph whose edge `e` carries a matrix on the strings of its color.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGraph<T> {
    shape: ColoredDigraph,
    n: usize,
    labels: Vec<StructuredMatrix<T>>,
}

impl<T: Scalar> TestGraph<T> {
    /// `n` is the per-string side `N`; every label must have that side.
    pub fn new(shape: ColoredDigraph, n: usize, labels: Vec<StructuredMatrix<T>>) -> Result<Self> {
        if labels.len() != shape.edge_count() {
            return Err(Error::SizeMismatch(format!(
                "{} labels for {} edges",
                labels.len(),
                shape.edge_count()
            )));
        }
        if let Some(x) = labels.iter().find(|x| x.side() != n) {
            return Err(Error::SizeMismatch(format!(
                "label of side {} in a graph of side {n}",
                x.side()
            )));
        }
        Ok(TestGraph { shape, n, labels })
    }

    pub fn shape(&self) -> &ColoredDigraph {
        &self.shape
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[StructuredMatrix<T>] {
        &self.labels
    }

    pub fn vertex_count(&self) -> usize {
        self.shape.vertex_count()
    }

    /// Every label must live on exactly the strings of its edge's color.
    pub fn check_assignment(&self, a: &StringAssignment) -> Result<()> {
        self.shape.check_colors(a)?;
        for (e, x) in self.labels.iter().enumerate() {
            let c = self.shape.color(e);
            if x.support() != a.strings_of(c) {
                return Err(Error::InvalidInput(format!(
                    "label of edge {e} lives on {:?}, color {c} on {:?}",
                    x.support(),
                    a.strings_of(c)
                )));
            }
        }
        Ok(())
    }

    pub fn restrict_colors(&self, keep: impl FnMut(usize) -> bool) -> TestGraph<T> {
        let (shape, ids) = self.shape.restrict_colors(keep);
        TestGraph {
            shape,
            n: self.n,
            labels: ids.iter().map(|&e| self.labels[e].clone()).collect(),
        }
    }

    pub fn quotient(&self, p: &Partition) -> Result<TestGraph<T>> {
        Ok(TestGraph {
            shape: self.shape.quotient(p)?,
            n: self.n,
            labels: self.labels.clone(),
        })
    }

    /// The labels as plain matrices of side `N^{#S_c}`. All edges must have color `c`.
    pub fn color_local(&self, a: &StringAssignment, c: usize) -> Result<LabeledDigraph<T>> {
        if let Some(e) = (0..self.shape.edge_count()).find(|&e| self.shape.color(e) != c) {
            return Err(Error::InvalidInput(format!(
                "edge {e} has color {}, expected {c}",
                self.shape.color(e)
            )));
        }
        let dim = MultiIndexSpace::new(a.strings_of(c).to_vec(), self.n).dim();
        LabeledDigraph::new(
            self.shape.graph.clone(),
            dim,
            self.labels.iter().map(|x| x.entries().clone()).collect(),
            None,
        )
    }

    /// Labels `Σ_c* X_e Σ_c ⊗ I` on `[N]^S`, with `sigmas[c]` acting on `[N]^{S_c}`.
    pub fn full_labeled(
        &self,
        a: &StringAssignment,
        sigmas: &[Permutation],
        guards: &Guards,
    ) -> Result<LabeledDigraph<T>> {
        self.check_assignment(a)?;
        let space = MultiIndexSpace::full(a.string_count(), self.n);
        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(e, x)| {
                let sigma = sigmas.get(self.shape.color(e)).ok_or_else(|| {
                    Error::SizeMismatch(format!("no permutation for color {}", self.shape.color(e)))
                })?;
                lift(&conjugate_by_color(x, sigma)?, &space, guards)
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDigraph::new(self.shape.graph.clone(), space.dim(), labels, None)
    }
}

/// A test graph with a diagonal loop label `Λ_v` on `[N]^S` at every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopedTestGraph<T> {
    base: TestGraph<T>,
    loops: Vec<DiagonalMatrix<T>>,
}

impl<T: Scalar> LoopedTestGraph<T> {
    pub fn new(base: TestGraph<T>, loops: Vec<DiagonalMatrix<T>>) -> Result<Self> {
        if loops.len() != base.vertex_count() {
            return Err(Error::SizeMismatch(format!(
                "{} loop labels for {} vertices",
                loops.len(),
                base.vertex_count()
            )));
        }
        if loops.windows(2).any(|w| w[0].dim() != w[1].dim()) {
            return Err(Error::SizeMismatch("loop labels differ in dimension".into()));
        }
        Ok(LoopedTestGraph { base, loops })
    }

    /// Identity loops on `[N]^{#strings}`.
    pub fn with_identity_loops(base: TestGraph<T>, string_count: usize) -> Self {
        let dim = MultiIndexSpace::full(string_count, base.side()).dim();
        let loops = vec![DiagonalMatrix::identity(dim); base.vertex_count()];
        LoopedTestGraph { base, loops }
    }

    pub fn base(&self) -> &TestGraph<T> {
        &self.base
    }

    pub fn shape(&self) -> &ColoredDigraph {
        self.base.shape()
    }

    pub fn loops(&self) -> &[DiagonalMatrix<T>] {
        &self.loops
    }

    pub fn side(&self) -> usize {
        self.base.side()
    }

    pub fn check_assignment(&self, a: &StringAssignment) -> Result<()> {
        self.base.check_assignment(a)?;
        let dim = MultiIndexSpace::full(a.string_count(), self.side()).total_dim();
        match self.loops.iter().find(|l| l.dim() as u128 != dim) {
            Some(l) => Err(Error::SizeMismatch(format!(
                "loop label of dimension {} on a space of dimension {dim}",
                l.dim()
            ))),
            None => Ok(()),
        }
    }

    /// Identifies vertices by `p`; loop labels landing on one vertex are multiplied.
    pub fn quotient(&self, p: &Partition) -> Result<LoopedTestGraph<T>> {
        let base = self.base.quotient(p)?;
        let dim = self.loops.first().map_or(0, DiagonalMatrix::dim);
        let mut loops = vec![DiagonalMatrix::identity(dim); p.block_count()];
        for (v, l) in self.loops.iter().enumerate() {
            let b = p.block_of(v);
            loops[b] = loops[b].mul(l)?;
        }
        Ok(LoopedTestGraph { base, loops })
    }

    pub fn full_labeled(
        &self,
        a: &StringAssignment,
        sigmas: &[Permutation],
        guards: &Guards,
    ) -> Result<LabeledDigraph<T>> {
        self.check_assignment(a)?;
        let mut g = self.base.full_labeled(a, sigmas, guards)?;
        g.vertex_labels = self.loops.iter().map(|l| Some(l.entries().to_vec())).collect();
        Ok(g)
    }
}

/// A digraph with square matrices of a common dimension on its edges and optional
/// diagonals on its vertices. This is the form in which traces are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDigraph<T> {
    graph: DiGraph,
    dim: usize,
    edge_labels: Vec<Matrix<T>>,
    vertex_labels: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> LabeledDigraph<T> {
    pub fn new(
        graph: DiGraph,
        dim: usize,
        edge_labels: Vec<Matrix<T>>,
        vertex_labels: Option<Vec<Vec<T>>>,
    ) -> Result<Self> {
        if edge_labels.len() != graph.edge_count() {
            return Err(Error::SizeMismatch(format!(
                "{} labels for {} edges",
                edge_labels.len(),
                graph.edge_count()
            )));
        }
        if edge_labels.iter().any(|m| m.rows() != dim || m.cols() != dim) {
            return Err(Error::SizeMismatch(format!("edge labels must be {dim}x{dim}")));
        }
        let vertex_labels = match vertex_labels {
            None => vec![None; graph.vertex_count()],
            Some(v) => {
                if v.len() != graph.vertex_count() || v.iter().any(|d| d.len() != dim) {
                    return Err(Error::SizeMismatch(format!(
                        "vertex labels must be {} diagonals of length {dim}",
                        graph.vertex_count()
                    )));
                }
                v.into_iter().map(Some).collect()
            }
        };
        Ok(LabeledDigraph {
            graph,
            dim,
            edge_labels,
            vertex_labels,
        })
    }

    pub fn graph(&self) -> &DiGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ_{i : V -> [dim]} ∏_e X_e[i(e+), i(e-)] ∏_v Λ_v[i(v)]`.
    pub fn raw_trace(&self, guards: &Guards) -> Result<T> {
        self.labeling_sum(false, guards)
    }

    /// `raw_trace / dim^{#components}`.
    pub fn trace(&self, guards: &Guards) -> Result<T> {
        Ok(self.raw_trace(guards)? / self.normalizer())
    }

    /// The raw sum over injective labelings only. Zero when `#V > dim`.
    pub fn raw_injective_trace(&self, guards: &Guards) -> Result<T> {
        self.labeling_sum(true, guards)
    }

    pub fn injective_trace(&self, guards: &Guards) -> Result<T> {
        Ok(self.raw_injective_trace(guards)? / self.normalizer())
    }

    fn normalizer(&self) -> T {
        pow_usize(&T::from_i64(self.dim as i64), self.graph.component_count())
    }

    /// Depth-first enumeration in a BFS vertex order so that each edge is multiplied in
    /// as soon as both endpoints are labeled; zero partial products prune the subtree.
    /// Vertices without edges or labels contribute a counting factor instead.
    fn labeling_sum(&self, injective: bool, guards: &Guards) -> Result<T> {
        let n = self.graph.vertex_count();
        let mut incident = vec![false; n];
        for &(s, t) in self.graph.edges() {
            incident[s] = true;
            incident[t] = true;
        }
        let active: Vec<bool> = (0..n)
            .map(|v| incident[v] || self.vertex_labels[v].is_some())
            .collect();
        let order = bfs_order(&self.graph, &active);
        let k = order.len();
        let free = n - k;
        let needed = if injective {
            falling_factorial(self.dim as u128, k)
        } else {
            saturating_pow(self.dim as u128, k)
        };
        guards.check(GuardKind::Maps, needed)?;
        if injective && n > self.dim {
            return Ok(T::zero());
        }

        let mut pos = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        // Edges to multiply in once order[i] is labeled.
        let mut closing: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (e, &(s, t)) in self.graph.edges().iter().enumerate() {
            closing[pos[s].max(pos[t])].push(e);
        }
        let mut state = Dfs {
            g: self,
            order: &order,
            closing: &closing,
            labels: vec![0; n],
            used: vec![false; if injective { self.dim } else { 0 }],
            injective,
        };
        let sum = state.run(0, T::one());

        let multiplier = if injective {
            (0..free).fold(T::one(), |acc, j| acc * T::from_i64((self.dim - k - j) as i64))
        } else {
            pow_usize(&T::from_i64(self.dim as i64), free)
        };
        Ok(sum * multiplier)
    }
}

struct Dfs<'a, T> {
    g: &'a LabeledDigraph<T>,
    order: &'a [usize],
    closing: &'a [Vec<usize>],
    labels: Vec<usize>,
    used: Vec<bool>,
    injective: bool,
}

impl<T: Scalar> Dfs<'_, T> {
    fn run(&mut self, depth: usize, acc: T) -> T {
        if depth == self.order.len() {
            return acc;
        }
        let v = self.order[depth];
        let mut total = T::zero();
        for a in 0..self.g.dim {
            if self.injective && self.used[a] {
                continue;
            }
            self.labels[v] = a;
            let mut w = acc.clone();
            if let Some(d) = &self.g.vertex_labels[v] {
                w = w * d[a].clone();
            }
            for &e in &self.closing[depth] {
                if w.is_zero() {
                    break;
                }
                let (s, t) = self.g.graph.edges()[e];
                w = w * self.g.edge_labels[e].get(self.labels[t], self.labels[s]).clone();
            }
            if w.is_zero() {
                continue;
            }
            if self.injective {
                self.used[a] = true;
            }
            total = total + self.run(depth + 1, w);
            if self.injective {
                self.used[a] = false;
            }
        }
        total
    }
}

/// Active vertices in BFS order over the undirected adjacency, component by component.
fn bfs_order(g: &DiGraph, active: &[bool]) -> Vec<usize> {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for &(s, t) in g.edges() {
        adj[s].push(t);
        adj[t].push(s);
    }
    let mut seen = vec![false; n];
    let mut order = Vec::new();
    for root in 0..n {
        if !active[root] || seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order
}
