//! Centered chains of conjugated matrices: the two-cycle test graph that computes their
//! squared norm, the signed subset expansion, the search for tuples that would survive
//! in the limit, and Monte Carlo decay and concentration runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{Partition, UnionFind};
use crate::error::{saturating_pow, Error, GuardKind, Guards, Result};
use crate::model::{
    build_string_assignment, is_g_reduced, validate_assignment, ColorGraph, ColorWord, ModelFile,
    StringAssignment,
};
use crate::scalar::Scalar;
use crate::tensor::{
    centered_chain_norm_sq, chain_product, conjugate_by_color, stream_rng, DiagonalMatrix, Matrix,
    MatrixFile, MultiIndexSpace, Permutation, StructuredMatrix,
};
use crate::traffic::{
    admissible_tuples, analyze, ColoredDigraph, LoopedTestGraph, MultiPartition, TestGraph,
};

/// How the matrices `X_{i,j}` are produced for a given side `N`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XGenerator {
    Identity,
    /// The cyclic shift on `[N]^{S_c}`; trace zero for `N > 1`.
    CyclicShift,
    #[default]
    RandomPermutation,
    /// A random permutation matrix with independent random signs: orthogonal, not
    /// permutation-structured.
    RandomSignedPermutation,
    /// `matrices[i][j]`; the side must match the requested `N`.
    Fixture { matrices: Vec<Vec<MatrixFile>> },
}

/// How the diagonals `Λ_{i,j}` on `[N]^S` are produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaGenerator {
    #[default]
    Identity,
    RandomSigns,
    /// `diagonals[i][j]`, each of length `N^{#S}`.
    Fixture { diagonals: Vec<Vec<Vec<f64>>> },
}

fn default_norm_bound() -> f64 {
    1.0
}

/// On-disk chain description; colors in `word` are referred to by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub model: ModelFile,
    pub word: Vec<String>,
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub x: XGenerator,
    #[serde(default)]
    pub lambda: LambdaGenerator,
    #[serde(default = "default_norm_bound")]
    pub norm_bound: f64,
}

impl ChainSpec {
    pub fn resolve(&self) -> Result<Chain> {
        let g = self.model.color_graph()?;
        let a = match self.model.assignment()? {
            Some(a) => a,
            None => build_string_assignment(&g),
        };
        let chi = self
            .word
            .iter()
            .map(|c| {
                g.index_of(c)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown color '{c}' in word")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut chain = Chain::new(g, a, chi, self.lengths.clone())?;
        chain.x = self.x.clone();
        chain.lambda = self.lambda.clone();
        chain.norm_bound = self.norm_bound;
        Ok(chain)
    }
}

/// A validated chain: a `𝒢`-reduced color word `χ`, lengths `ℓ`, and input generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    graph: ColorGraph,
    assignment: StringAssignment,
    chi: Vec<usize>,
    lengths: Vec<usize>,
    pub x: XGenerator,
    pub lambda: LambdaGenerator,
    pub norm_bound: f64,
}

/// One realization of the inputs: `xs[i][j]` on the strings of `χ(i)`, `lambdas[i][j]` on
/// the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInputs<T> {
    pub xs: Vec<Vec<StructuredMatrix<T>>>,
    pub lambdas: Vec<Vec<DiagonalMatrix<T>>>,
}

impl Chain {
    pub fn new(
        graph: ColorGraph,
        assignment: StringAssignment,
        chi: Vec<usize>,
        lengths: Vec<usize>,
    ) -> Result<Self> {
        let report = validate_assignment(&graph, &assignment)?;
        if !report.valid {
            return Err(Error::InvalidInput(format!(
                "assignment violates the model: {:?}",
                report.violations
            )));
        }
        if chi.is_empty() || chi.len() != lengths.len() {
            return Err(Error::InvalidInput(format!(
                "word of length {} with {} block lengths",
                chi.len(),
                lengths.len()
            )));
        }
        if lengths.contains(&0) {
            return Err(Error::InvalidInput("block lengths must be positive".into()));
        }
        if let Some(&c) = chi.iter().find(|&&c| c >= graph.color_count()) {
            return Err(Error::InvalidInput(format!("color {c} out of range")));
        }
        if !is_g_reduced(&ColorWord::new(chi.clone()), &graph) {
            return Err(Error::InvalidInput(format!("word {chi:?} is not reduced")));
        }
        Ok(Chain {
            graph,
            assignment,
            chi,
            lengths,
            x: XGenerator::default(),
            lambda: LambdaGenerator::default(),
            norm_bound: 1.0,
        })
    }

    pub fn graph(&self) -> &ColorGraph {
        &self.graph
    }

    pub fn assignment(&self) -> &StringAssignment {
        &self.assignment
    }

    pub fn word(&self) -> &[usize] {
        &self.chi
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn k(&self) -> usize {
        self.chi.len()
    }

    pub fn squared_chain(&self) -> SquaredChainGraph {
        SquaredChainGraph::new(&self.chi, &self.lengths)
    }

    /// The deterministic inputs at side `n`, drawn from `rng` when the generator is random.
    pub fn draw_inputs<T: Scalar, R: rand::Rng>(&self, n: usize, rng: &mut R) -> Result<ChainInputs<T>> {
        let a = &self.assignment;
        let full_dim = MultiIndexSpace::full(a.string_count(), n).dim();
        let mut xs = Vec::with_capacity(self.k());
        let mut lambdas = Vec::with_capacity(self.k());
        for (i, (&c, &len)) in self.chi.iter().zip(&self.lengths).enumerate() {
            let support = a.strings_of(c).to_vec();
            let d = MultiIndexSpace::new(support.clone(), n).dim();
            let mut row = Vec::with_capacity(len);
            let mut lrow = Vec::with_capacity(len);
            for j in 0..len {
                let x = match &self.x {
                    XGenerator::Identity => StructuredMatrix::identity(support.clone(), n),
                    XGenerator::CyclicShift => {
                        StructuredMatrix::from_permutation(support.clone(), n, Permutation::cycle(d))?
                    }
                    XGenerator::RandomPermutation => StructuredMatrix::from_permutation(
                        support.clone(),
                        n,
                        Permutation::sample(d, rng)?,
                    )?,
                    XGenerator::RandomSignedPermutation => {
                        let p = Permutation::sample(d, rng)?;
                        let signs: Vec<i64> =
                            (0..d).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                        let m = Matrix::from_fn(d, d, |r, col| {
                            if p.apply(col) == r {
                                T::from_i64(signs[col])
                            } else {
                                T::zero()
                            }
                        });
                        StructuredMatrix::new(support.clone(), n, m)?
                    }
                    XGenerator::Fixture { matrices } => {
                        let f = matrices.get(i).and_then(|r| r.get(j)).ok_or_else(|| {
                            Error::InvalidInput(format!("no fixture matrix for block {i}, entry {j}"))
                        })?;
                        if f.support != support || f.n != n {
                            return Err(Error::InvalidInput(format!(
                                "fixture matrix ({i},{j}) lives on {:?} with side {}, expected {support:?} with side {n}",
                                f.support, f.n
                            )));
                        }
                        f.to_structured()?
                    }
                };
                let bound = norm_upper_bound(x.entries());
                if bound > self.norm_bound + 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "X({i},{j}) has norm bound {bound} above {}",
                        self.norm_bound
                    )));
                }
                let l = match &self.lambda {
                    LambdaGenerator::Identity => DiagonalMatrix::identity(full_dim),
                    LambdaGenerator::RandomSigns => DiagonalMatrix::new(
                        (0..full_dim)
                            .map(|_| T::from_i64(if rng.gen::<bool>() { 1 } else { -1 }))
                            .collect(),
                    ),
                    LambdaGenerator::Fixture { diagonals } => {
                        let v = diagonals.get(i).and_then(|r| r.get(j)).ok_or_else(|| {
                            Error::InvalidInput(format!("no fixture diagonal for block {i}, entry {j}"))
                        })?;
                        if v.len() != full_dim {
                            return Err(Error::InvalidInput(format!(
                                "fixture diagonal ({i},{j}) has length {}, expected {full_dim}",
                                v.len()
                            )));
                        }
                        DiagonalMatrix::new(
                            v.iter()
                                .map(|&x| {
                                    T::from_parts(x, 0.0).ok_or_else(|| {
                                        Error::InvalidInput(format!("diagonal entry {x} not representable"))
                                    })
                                })
                                .collect::<Result<_>>()?,
                        )
                    }
                };
                if l.op_norm() > self.norm_bound + 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "Λ({i},{j}) has norm {} above {}",
                        l.op_norm(),
                        self.norm_bound
                    )));
                }
                row.push(x);
                lrow.push(l);
            }
            xs.push(row);
            lambdas.push(lrow);
        }
        Ok(ChainInputs { xs, lambdas })
    }

    /// Independent uniform permutations, one per color, on `[N]^{S_c}`.
    pub fn draw_sigmas<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Permutation>> {
        (0..self.graph.color_count())
            .map(|c| {
                let d = MultiIndexSpace::new(self.assignment.strings_of(c).to_vec(), n).dim();
                Permutation::sample(d, rng)
            })
            .collect()
    }

    /// The factors `Y_i = Λ_{i,1} X̲_{i,1} ⋯ Λ_{i,ℓ} X̲_{i,ℓ}` as dense matrices.
    pub fn factors<T: Scalar>(
        &self,
        n: usize,
        inputs: &ChainInputs<T>,
        sigmas: &[Permutation],
        guards: &Guards,
    ) -> Result<Vec<Matrix<T>>> {
        let space = MultiIndexSpace::full(self.assignment.string_count(), n);
        self.chi
            .iter()
            .zip(inputs.xs.iter().zip(&inputs.lambdas))
            .map(|(&c, (xs, ls))| {
                let conj = xs
                    .iter()
                    .map(|x| conjugate_by_color(x, &sigmas[c]))
                    .collect::<Result<Vec<_>>>()?;
                chain_product(&space, ls, &conj, guards)
            })
            .collect()
    }

    /// `‖Δ[(Y₁ − ΔY₁)⋯(Y_k − ΔY_k)]‖₂²` for one draw.
    pub fn centered_norm_sq<T: Scalar>(
        &self,
        n: usize,
        inputs: &ChainInputs<T>,
        sigmas: &[Permutation],
        guards: &Guards,
    ) -> Result<T> {
        centered_chain_norm_sq(&self.factors(n, inputs, sigmas, guards)?)
    }

    /// The squared chain with the given inputs as labels.
    pub fn test_graph<T: Scalar>(&self, n: usize, inputs: &ChainInputs<T>) -> Result<LoopedTestGraph<T>> {
        self.squared_chain().test_graph(n, inputs)
    }
}

/// `sqrt(‖X‖₁ ‖X‖_∞)`, an upper bound on the operator norm.
fn norm_upper_bound<T: Scalar>(m: &Matrix<T>) -> f64 {
    let rows = (0..m.rows())
        .map(|i| m.row(i).iter().map(Scalar::modulus).sum::<f64>())
        .fold(0.0, f64::max);
    let cols = (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m.get(i, j).modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    (rows * cols).sqrt()
}

/// Two cycles sharing one vertex. The first runs through blocks `B_1, …, B_k`, where block
/// `i` has vertices `u_{i,0}, …, u_{i,ℓ_i}` and the edge carrying `X_{i,j}` goes from
/// `u_{i,j+1}` to `u_{i,j}`; consecutive blocks are glued by `u_{i,ℓ_i} = u_{i+1,0}`,
/// cyclically. The second cycle is the primed copy with edges reversed and labels adjoint.
/// `u_{0,0} = u'_{0,0}`. Indices here are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredChainGraph {
    shape: ColoredDigraph,
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl SquaredChainGraph {
    pub fn new(chi: &[usize], lengths: &[usize]) -> Self {
        let total: usize = lengths.iter().sum();
        let offsets: Vec<usize> = lengths
            .iter()
            .scan(0, |acc, &l| {
                let o = *acc;
                *acc += l;
                Some(o)
            })
            .collect();
        let mut g = SquaredChainGraph {
            shape: ColoredDigraph::from_edges(1, &[]).expect("empty graph"),
            lengths: lengths.to_vec(),
            offsets,
            total,
        };
        let mut edges = Vec::with_capacity(2 * total);
        for (i, &c) in chi.iter().enumerate() {
            for j in 0..lengths[i] {
                edges.push((g.u(i, j + 1), g.u(i, j), c));
            }
        }
        for (i, &c) in chi.iter().enumerate() {
            for j in 0..lengths[i] {
                edges.push((g.u_prime(i, j), g.u_prime(i, j + 1), c));
            }
        }
        g.shape = ColoredDigraph::from_edges(2 * total - 1, &edges).expect("valid chain edges");
        g
    }

    pub fn shape(&self) -> &ColoredDigraph {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.shape.vertex_count()
    }

    fn position(&self, i: usize, j: usize) -> usize {
        (self.offsets[i] + j) % self.total
    }

    /// `u_{i,j}` for `j ≤ ℓ_i`.
    pub fn u(&self, i: usize, j: usize) -> usize {
        self.position(i, j)
    }

    /// `u'_{i,j}` for `j ≤ ℓ_i`.
    pub fn u_prime(&self, i: usize, j: usize) -> usize {
        match self.position(i, j) {
            0 => 0,
            p => self.total + p - 1,
        }
    }

    /// Edge id of `X_{i,j}`.
    pub fn edge(&self, i: usize, j: usize) -> usize {
        self.offsets[i] + j
    }

    /// Edge id of `X*_{i,j}`.
    pub fn edge_prime(&self, i: usize, j: usize) -> usize {
        self.total + self.offsets[i] + j
    }

    pub fn vertex_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.vertex_count()];
        for i in (0..self.k()).rev() {
            for j in (0..self.lengths[i]).rev() {
                names[self.u_prime(i, j)] = format!("u'{},{}", i + 1, j + 1);
                names[self.u(i, j)] = format!("u{},{}", i + 1, j + 1);
            }
        }
        names
    }

    /// Labels `X_{i,j}` and their adjoints on the edges, `Λ_{i,j}` at `u_{i,j}` and `Λ*_{i,j}`
    /// at `u'_{i,j}` (multiplied at the shared vertex).
    pub fn test_graph<T: Scalar>(&self, n: usize, inputs: &ChainInputs<T>) -> Result<LoopedTestGraph<T>> {
        if inputs.xs.len() != self.k()
            || inputs.xs.iter().zip(&self.lengths).any(|(r, &l)| r.len() != l)
            || inputs.lambdas.iter().zip(&self.lengths).any(|(r, &l)| r.len() != l)
        {
            return Err(Error::SizeMismatch("inputs do not match the chain lengths".into()));
        }
        let mut labels = vec![None; self.shape.edge_count()];
        let dim = inputs.lambdas[0][0].dim();
        let mut loops = vec![DiagonalMatrix::identity(dim); self.vertex_count()];
        for i in 0..self.k() {
            for j in 0..self.lengths[i] {
                let x = &inputs.xs[i][j];
                labels[self.edge(i, j)] = Some(x.clone());
                labels[self.edge_prime(i, j)] = Some(x.adjoint());
                let l = &inputs.lambdas[i][j];
                let lc = DiagonalMatrix::new(l.entries().iter().map(Scalar::conj).collect());
                loops[self.u(i, j)] = loops[self.u(i, j)].mul(l)?;
                loops[self.u_prime(i, j)] = loops[self.u_prime(i, j)].mul(&lc)?;
            }
        }
        let labels = labels.into_iter().map(|x| x.expect("every edge labeled")).collect();
        LoopedTestGraph::new(TestGraph::new(self.shape.clone(), n, labels)?, loops)
    }

    /// `ρ_I`: identifies the two ends of block `i` for each `i ∈ I`, of the primed block
    /// for `-i`. Indices in `I` are 1-based and signed.
    pub fn subset_partition(&self, subset: &[i64]) -> Result<Partition> {
        let mut uf = UnionFind::new(self.vertex_count());
        for &s in subset {
            let i = s.unsigned_abs() as usize;
            if i == 0 || i > self.k() {
                return Err(Error::InvalidInput(format!("index {s} outside ±1..±{}", self.k())));
            }
            let (a, b) = if s > 0 {
                (self.u(i - 1, 0), self.u(i - 1, self.lengths[i - 1]))
            } else {
                (self.u_prime(i - 1, 0), self.u_prime(i - 1, self.lengths[i - 1]))
            };
            uf.union(a, b);
        }
        Ok(uf.partition())
    }

    /// `J_π`: the signed indices whose block ends are identified by `⋀_s π_s`.
    pub fn j_set(&self, pi: &MultiPartition) -> Result<Vec<i64>> {
        if pi.ground_size() != self.vertex_count() {
            return Err(Error::SizeMismatch(format!(
                "tuple on {} vertices for a chain graph on {}",
                pi.ground_size(),
                self.vertex_count()
            )));
        }
        let meet = pi.meet_all();
        let mut j = Vec::new();
        for i in 0..self.k() {
            let l = self.lengths[i];
            if meet.block_of(self.u(i, 0)) == meet.block_of(self.u(i, l)) {
                j.push(i as i64 + 1);
            }
            if meet.block_of(self.u_prime(i, 0)) == meet.block_of(self.u_prime(i, l)) {
                j.push(-(i as i64 + 1));
            }
        }
        Ok(j)
    }

    /// All `I ⊆ {±1, …, ±k}`, ordered by bitmask over `1, -1, 2, -2, …`.
    pub fn subsets(&self) -> Vec<Vec<i64>> {
        let k = self.k();
        (0u64..1 << (2 * k))
            .map(|mask| {
                (0..2 * k)
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| {
                        let i = (b / 2) as i64 + 1;
                        if b % 2 == 0 {
                            i
                        } else {
                            -i
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// `T_I = T/ρ_I` with the loop labels merged, and the sign `(-1)^{#I}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetQuotient<T> {
    pub subset: Vec<i64>,
    pub partition: Partition,
    pub graph: LoopedTestGraph<T>,
    pub sign: i64,
}

pub fn subset_quotient<T: Scalar>(
    sq: &SquaredChainGraph,
    t: &LoopedTestGraph<T>,
    subset: &[i64],
) -> Result<SubsetQuotient<T>> {
    let partition = sq.subset_partition(subset)?;
    Ok(SubsetQuotient {
        subset: subset.to_vec(),
        graph: t.quotient(&partition)?,
        partition,
        sign: if subset.len().is_multiple_of(2) { 1 } else { -1 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedExpansionReport<T> {
    /// `‖Δ[(Y₁ − ΔY₁)⋯(Y_k − ΔY_k)]‖₂²` from the matrices.
    pub lhs: T,
    /// `Σ_I (-1)^{#I} τ(T̊_I)` from the test graphs.
    pub rhs: T,
    pub subsets: usize,
}

impl<T: Scalar> SignedExpansionReport<T> {
    pub fn holds(&self) -> bool {
        self.lhs.close_to(&self.rhs, 1e-9)
    }
}

/// Evaluates both sides of the subset expansion for one draw of inputs and color
/// permutations at side `n`.
pub fn signed_expansion_check<T: Scalar>(
    chain: &Chain,
    n: usize,
    seed: u64,
    guards: &Guards,
) -> Result<SignedExpansionReport<T>> {
    let inputs = chain.draw_inputs::<T, _>(n, &mut stream_rng(seed, &[n as u64, 0]))?;
    let sigmas = chain.draw_sigmas(n, &mut stream_rng(seed, &[n as u64, 1, 0]))?;
    signed_expansion_with(chain, n, &inputs, &sigmas, guards)
}

pub fn signed_expansion_with<T: Scalar>(
    chain: &Chain,
    n: usize,
    inputs: &ChainInputs<T>,
    sigmas: &[Permutation],
    guards: &Guards,
) -> Result<SignedExpansionReport<T>> {
    let lhs = chain.centered_norm_sq(n, inputs, sigmas, guards)?;
    let sq = chain.squared_chain();
    let t = sq.test_graph(n, inputs)?;
    let subsets = sq.subsets();
    let mut rhs = T::zero();
    for subset in &subsets {
        let q = subset_quotient(&sq, &t, subset)?;
        let tau = q
            .graph
            .full_labeled(chain.assignment(), sigmas, guards)?
            .trace(guards)?;
        rhs = rhs + T::from_i64(q.sign) * tau;
    }
    Ok(SignedExpansionReport {
        lhs,
        rhs,
        subsets: subsets.len(),
    })
}

/// Admissible tuples of the squared chain whose graphs of colored components are all trees
/// and, unless `drop_j_condition`, with `J_π` empty. Expected empty when the condition is
/// kept.
pub fn inconsistency_search(
    chain: &Chain,
    drop_j_condition: bool,
    guards: &Guards,
) -> Result<Vec<MultiPartition>> {
    search(chain, drop_j_condition, usize::MAX, guards)
}

/// The first tuple [`inconsistency_search`] would report, stopping there.
pub fn first_inconsistency(
    chain: &Chain,
    drop_j_condition: bool,
    guards: &Guards,
) -> Result<Option<MultiPartition>> {
    Ok(search(chain, drop_j_condition, 1, guards)?.pop())
}

fn search(
    chain: &Chain,
    drop_j_condition: bool,
    limit: usize,
    guards: &Guards,
) -> Result<Vec<MultiPartition>> {
    let sq = chain.squared_chain();
    let a = chain.assignment();
    let mut out = Vec::new();
    for pi in admissible_tuples(sq.shape(), a, guards)? {
        if out.len() >= limit {
            break;
        }
        if !drop_j_condition && !sq.j_set(&pi)?.is_empty() {
            continue;
        }
        if analyze(sq.shape(), &pi, a)?.all_trees() {
            out.push(pi);
        }
    }
    Ok(out)
}

/// Every chain over color graphs on at most `max_colors` colors, with every valid
/// assignment of at most `max_strings` nonempty strings (up to reordering strings), and
/// every reduced word with block lengths summing to at most `max_total_length`.
pub fn small_chains(max_colors: usize, max_strings: usize, max_total_length: usize) -> Vec<Chain> {
    let mut out = Vec::new();
    for m in 1..=max_colors {
        let subsets: Vec<Vec<usize>> = (1u32..1 << m)
            .map(|mask| (0..m).filter(|&c| mask >> c & 1 == 1).collect())
            .collect();
        for g in ColorGraph::all_on(m) {
            for a in multisets(subsets.len(), max_strings)
                .into_iter()
                .filter_map(|pick| {
                    let strings: Vec<Vec<usize>> = pick.iter().map(|&i| subsets[i].clone()).collect();
                    let sets: Vec<Vec<usize>> = (0..m)
                        .map(|c| (0..strings.len()).filter(|&s| strings[s].contains(&c)).collect())
                        .collect();
                    let a = StringAssignment::from_color_sets(strings.len(), &sets).ok()?;
                    validate_assignment(&g, &a).ok()?.valid.then_some(a)
                })
            {
                for lengths in compositions(max_total_length) {
                    for chi in words(m, lengths.len()) {
                        if let Ok(chain) = Chain::new(g.clone(), a.clone(), chi, lengths.clone()) {
                            out.push(chain);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Nondecreasing index sequences of length `1..=max_len` over `0..n`.
fn multisets(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|p| {
                let start = p.last().copied().unwrap_or(0);
                (start..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// Sequences of positive integers with sum at most `max`.
fn compositions(max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<usize>, usize)> = vec![(vec![], 0)];
    while let Some((p, sum)) = frontier.pop() {
        if !p.is_empty() {
            out.push(p.clone());
        }
        for l in 1..=max - sum {
            let mut q = p.clone();
            q.push(l);
            frontier.push((q, sum + l));
        }
    }
    out.sort();
    out
}

fn words(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k).fold(vec![vec![]], |acc, _| {
        acc.into_iter()
            .flat_map(|w: Vec<usize>| {
                (0..m).map(move |c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect()
    })
}

fn default_samples() -> usize {
    200
}

fn default_slope_band() -> [f64; 2] {
    [-1.6, -0.6]
}

/// Config for decay and concentration runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_slope_band")]
    pub slope_band: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub slope: Option<f64>,
    pub slope_band: [f64; 2],
    pub slope_in_band: bool,
    /// Each mean is at most the previous one plus twice their combined standard error.
    pub monotone: bool,
    /// The variance at the largest side is below the variance at the smallest.
    pub variance_decreasing: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub rows: Vec<ResultRow>,
    pub summary: ConvergenceSummary,
}

/// Squared centered norms for `samples` independent draws of the color permutations at
/// side `n`. Inputs are drawn once per side. Sample `j` uses its own stream, so the result
/// does not depend on the number of worker threads.
pub fn sample_norms(
    chain: &Chain,
    n: usize,
    samples: usize,
    seed: u64,
    guards: &Guards,
) -> Result<Vec<f64>> {
    let inputs = chain.draw_inputs::<f64, _>(n, &mut stream_rng(seed, &[n as u64, 0]))?;
    guards.check(
        GuardKind::Dense,
        saturating_pow(n as u128, chain.assignment().string_count()),
    )?;
    (0..samples)
        .into_par_iter()
        .map(|j| {
            let sigmas = chain.draw_sigmas(n, &mut stream_rng(seed, &[n as u64, 1, j as u64]))?;
            chain.centered_norm_sq(n, &inputs, &sigmas, guards)
        })
        .collect()
}

fn row(n: usize, values: &[f64]) -> ResultRow {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    let variance = if m > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    ResultRow {
        n,
        mean,
        stderr: (variance / m as f64).sqrt(),
        variance,
        samples: m,
    }
}

/// Least-squares slope of `log(mean)` against `log(N)`; `None` if a mean is not positive.
pub fn log_log_slope(rows: &[ResultRow]) -> Option<f64> {
    if rows.iter().any(|r| r.mean <= 0.0 || !r.mean.is_finite()) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), r.mean.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn convergence_run(
    chain: &Chain,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
    slope_band: [f64; 2],
    guards: &Guards,
) -> Result<ConvergenceResult> {
    if n_grid.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 grid points for a slope, got {}",
            n_grid.len()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    let rows = n_grid
        .iter()
        .map(|&n| Ok(row(n, &sample_norms(chain, n, samples, seed, guards)?)))
        .collect::<Result<Vec<_>>>()?;
    let slope = log_log_slope(&rows);
    let slope_in_band = slope.is_some_and(|s| s >= slope_band[0] && s <= slope_band[1]);
    let monotone = rows.windows(2).all(|w| {
        w[1].mean <= w[0].mean + 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
    });
    let variance_decreasing = rows[rows.len() - 1].variance < rows[0].variance;
    Ok(ConvergenceResult {
        summary: ConvergenceSummary {
            slope,
            slope_band,
            slope_in_band,
            monotone,
            variance_decreasing,
            passed: slope_in_band && monotone,
        },
        rows,
    })
}

/// Empirical variance of the squared centered norm per side.
pub fn concentration_run(
    chain: &Chain,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
    guards: &Guards,
) -> Result<Vec<ResultRow>> {
    n_grid
        .iter()
        .map(|&n| Ok(row(n, &sample_norms(chain, n, samples, seed, guards)?)))
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn run(&self, guards: &Guards) -> Result<ConvergenceResult> {
        let chain = self.chain.resolve()?;
        convergence_run(&chain, &self.n_grid, self.samples, self.seed, self.slope_band, guards)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn edgeless_two() -> (ColorGraph, StringAssignment) {
        let g = ColorGraph::edgeless(2);
        let a = build_string_assignment(&g);
        (g, a)
    }

    #[test]
    fn vertex_counts_and_connectivity() {
        for (lengths, v) in [(vec![1], 1), (vec![1, 1], 3), (vec![2, 1], 5), (vec![1, 1, 1], 5), (vec![3, 2], 9)] {
            let chi: Vec<usize> = (0..lengths.len()).map(|i| i % 2).collect();
            let sq = SquaredChainGraph::new(&chi, &lengths);
            assert_eq!(sq.vertex_count(), v);
            assert_eq!(sq.shape().edge_count(), 2 * lengths.iter().sum::<usize>());
            assert!(sq.shape().graph().is_two_edge_connected());
            assert_eq!(sq.shape().graph().two_edge_decompose().cut_edges.len(), 0);
        }
    }

    #[test]
    fn two_blocks_of_length_one_are_two_two_cycles() {
        let sq = SquaredChainGraph::new(&[0, 1], &[1, 1]);
        let edges = sq.shape().graph().edges().to_vec();
        assert_eq!(edges, vec![(1, 0), (0, 1), (0, 2), (2, 0)]);
        assert_eq!(sq.vertex_names(), ["u1,1", "u2,1", "u'2,1"]);
    }

    #[test]
    fn j_set_matches_direct_meet() {
        let (g, a) = edgeless_two();
        let chain = Chain::new(g, a, vec![0, 1, 0], vec![1, 2, 1]).unwrap();
        let sq = chain.squared_chain();
        for pi in admissible_tuples(sq.shape(), chain.assignment(), &Guards::default()).unwrap() {
            let j = sq.j_set(&pi).unwrap();
            for i in sq.subsets().into_iter().filter(|s| s.len() == 1) {
                let rho = sq.subset_partition(&i).unwrap();
                assert_eq!(rho.refines(&pi.meet_all()), j.contains(&i[0]));
            }
        }
    }

    #[test]
    fn degenerate_chain_is_exactly_zero() {
        let g = ColorGraph::complete(2);
        let a = build_string_assignment(&g);
        let mut chain = Chain::new(g, a, vec![0], vec![1]).unwrap();
        chain.x = XGenerator::CyclicShift;
        let r = convergence_run(&chain, &[2, 3, 4], 5, 1, [-1.6, -0.6], &Guards::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.mean == 0.0 && row.variance == 0.0));
        assert_eq!(r.summary.slope, None);
        let rep = signed_expansion_check::<Q>(&chain, 3, 0, &Guards::default()).unwrap();
        assert_eq!(rep.lhs, Q::from_i64(0));
        assert_eq!(rep.rhs, Q::from_i64(0));
    }

    #[test]
    fn signed_expansion_exact_edgeless() {
        let (g, a) = edgeless_two();
        for lengths in [vec![1, 1], vec![2, 1], vec![1, 1, 1]] {
            let chi: Vec<usize> = (0..lengths.len()).map(|i| i % 2).collect();
            let mut chain = Chain::new(g.clone(), a.clone(), chi, lengths).unwrap();
            chain.x = XGenerator::RandomSignedPermutation;
            chain.lambda = LambdaGenerator::RandomSigns;
            for seed in 0..3 {
                let r = signed_expansion_check::<Q>(&chain, 2, seed, &Guards::default()).unwrap();
                assert_eq!(r.lhs, r.rhs);
            }
        }
    }

    #[test]
    fn signed_expansion_in_floating_point() {
        let g = ColorGraph::with_indices(3, &[(0, 2)]).unwrap();
        let a = StringAssignment::from_color_sets(3, &[vec![0, 1], vec![1, 2], vec![2]]).unwrap();
        let mut chain = Chain::new(g, a, vec![0, 1, 0], vec![1, 1, 1]).unwrap();
        chain.lambda = LambdaGenerator::RandomSigns;
        let r = signed_expansion_check::<f64>(&chain, 2, 5, &Guards::default()).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn inconsistency_search_and_control() {
        let (g, a) = edgeless_two();
        let chain = Chain::new(g, a, vec![0, 1], vec![1, 1]).unwrap();
        let g = Guards::default();
        assert!(inconsistency_search(&chain, false, &g).unwrap().is_empty());
        assert!(!inconsistency_search(&chain, true, &g).unwrap().is_empty());
    }

    #[test]
    fn unreduced_word_rejected() {
        let g = ColorGraph::complete(2);
        let a = build_string_assignment(&g);
        assert!(Chain::new(g, a, vec![0, 1, 0], vec![1, 1, 1]).is_err());
    }

    #[test]
    fn runs_are_reproducible_and_thread_independent() {
        let (g, a) = edgeless_two();
        let chain = Chain::new(g, a, vec![0, 1], vec![1, 1]).unwrap();
        let guards = Guards::default();
        let r1 = sample_norms(&chain, 8, 40, 9, &guards).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let r2 = pool.install(|| sample_norms(&chain, 8, 40, 9, &guards)).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn small_chain_enumeration_has_expected_shape() {
        let chains = small_chains(2, 2, 2);
        assert!(!chains.is_empty());
        assert!(chains.iter().all(|c| c.lengths().iter().sum::<usize>() <= 2));
        assert!(chains.iter().all(|c| c.assignment().string_count() <= 2));
    }

    #[test]
    fn spec_round_trip() {
        let spec = ChainSpec {
            model: ModelFile::from_model(&ColorGraph::edgeless(2), None),
            word: vec!["c0".into(), "c1".into()],
            lengths: vec![1, 1],
            x: XGenerator::CyclicShift,
            lambda: LambdaGenerator::Identity,
            norm_bound: 1.0,
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: ChainSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.resolve().unwrap().k(), 2);
    }
}
