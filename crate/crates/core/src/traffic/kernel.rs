//! Kernel tuples `π = (π_s)_s` and the graphs built from them.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::ColoredDigraph;
use crate::combinatorics::{bell_number, DiGraph, Multigraph, Partition};
use crate::error::{Error, GuardKind, Guards, Result};
use crate::model::StringAssignment;

/// One partition of the vertex set per string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Partition>", into = "Vec<Partition>")]
pub struct MultiPartition(Vec<Partition>);

impl TryFrom<Vec<Partition>> for MultiPartition {
    type Error = Error;
    fn try_from(v: Vec<Partition>) -> Result<Self> {
        MultiPartition::new(v)
    }
}

impl From<MultiPartition> for Vec<Partition> {
    fn from(p: MultiPartition) -> Self {
        p.0
    }
}

impl MultiPartition {
    pub fn new(parts: Vec<Partition>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0].ground_size() != w[1].ground_size()) {
            return Err(Error::SizeMismatch("partitions of different ground sets".into()));
        }
        Ok(MultiPartition(parts))
    }

    pub fn parts(&self) -> &[Partition] {
        &self.0
    }

    pub fn get(&self, s: usize) -> &Partition {
        &self.0[s]
    }

    pub fn string_count(&self) -> usize {
        self.0.len()
    }

    pub fn ground_size(&self) -> usize {
        self.0.first().map_or(0, Partition::ground_size)
    }

    /// `⋀_s π_s`.
    pub fn meet_all(&self) -> Partition {
        self.0
            .iter()
            .skip(1)
            .fold(self.0.first().cloned().unwrap_or_else(|| Partition::singletons(0)), |acc, p| {
                acc.meet(p).expect("same ground size")
            })
    }

    /// `π_s ≥ ρ_s` for every `s`.
    pub fn dominates(&self, rho: &[Partition]) -> bool {
        self.0.len() == rho.len() && self.0.iter().zip(rho).all(|(p, r)| r.refines(p))
    }
}

impl fmt::Display for MultiPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

fn check_shape(t: &ColoredDigraph, pi: &MultiPartition, a: &StringAssignment) -> Result<()> {
    t.check_colors(a)?;
    if pi.string_count() != a.string_count() {
        return Err(Error::SizeMismatch(format!(
            "{} partitions for {} strings",
            pi.string_count(),
            a.string_count()
        )));
    }
    if pi.ground_size() != t.vertex_count() && pi.string_count() > 0 {
        return Err(Error::SizeMismatch(format!(
            "partitions of {} elements for {} vertices",
            pi.ground_size(),
            t.vertex_count()
        )));
    }
    Ok(())
}

fn check_string(a: &StringAssignment, s: usize) -> Result<()> {
    if s >= a.string_count() {
        return Err(Error::InvalidInput(format!("unknown string {s}")));
    }
    Ok(())
}

/// Weak components of `t` after deleting every edge whose color carries string `s`.
pub fn rho(t: &ColoredDigraph, a: &StringAssignment, s: usize) -> Result<Partition> {
    check_string(a, s)?;
    t.check_colors(a)?;
    let (g, _) = t.restrict_colors(|c| !a.incident(s, c));
    Ok(g.graph().weak_components())
}

pub fn rhos(t: &ColoredDigraph, a: &StringAssignment) -> Result<Vec<Partition>> {
    (0..a.string_count()).map(|s| rho(t, a, s)).collect()
}

pub fn is_admissible(t: &ColoredDigraph, pi: &MultiPartition, a: &StringAssignment) -> Result<bool> {
    check_shape(t, pi, a)?;
    Ok(pi.dominates(&rhos(t, a)?))
}

/// `ω_{π,c} = ⋀_{s ∈ S_c} π_s`.
pub fn omega(pi: &MultiPartition, a: &StringAssignment, c: usize) -> Result<Partition> {
    let strings = a.strings_of(c);
    let Some((&first, rest)) = strings.split_first() else {
        return Err(Error::Precondition(format!("color {c} has no strings")));
    };
    rest.iter()
        .try_fold(pi.get(first).clone(), |acc, &s| acc.meet(pi.get(s)))
}

/// `T_{π,c} = (T|_c) / ω_{π,c}`: all vertices kept, only `c`-colored edges. Returns the
/// quotient and the original ids of its edges.
pub fn t_pi_c(
    t: &ColoredDigraph,
    pi: &MultiPartition,
    a: &StringAssignment,
    c: usize,
) -> Result<(DiGraph, Vec<usize>)> {
    check_shape(t, pi, a)?;
    let w = omega(pi, a, c)?;
    let (g, ids) = t.restrict_colors(|x| x == c);
    Ok((g.graph().quotient(&w)?, ids))
}

/// `T^s_π = (T|_{C_s}) / π_s`.
pub fn t_pi_s(
    t: &ColoredDigraph,
    pi: &MultiPartition,
    a: &StringAssignment,
    s: usize,
) -> Result<(DiGraph, Vec<usize>)> {
    check_string(a, s)?;
    check_shape(t, pi, a)?;
    let (g, ids) = t.restrict_colors(|c| a.incident(s, c));
    Ok((g.graph().quotient(pi.get(s))?, ids))
}

/// `h_{s,c}`: block of `ω_{π,c}` to the block of `π_s` containing it, as a lookup table.
pub fn h_sc(pi: &MultiPartition, a: &StringAssignment, s: usize, c: usize) -> Result<Vec<usize>> {
    check_string(a, s)?;
    if !a.incident(s, c) {
        return Err(Error::Precondition(format!("string {s} is not a string of color {c}")));
    }
    let w = omega(pi, a, c)?;
    let p = pi.get(s);
    Ok(w.blocks().iter().map(|b| p.block_of(b[0])).collect())
}

/// An edge of the graph of colored components: the vertex `vertex` of `T_{π,c}` joins its
/// component (`right`) to its image under `h_{s,c}` (`left`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GccEdge {
    pub color: usize,
    pub vertex: usize,
    pub left: usize,
    pub right: usize,
}

/// Bipartite multigraph between the blocks of `π_s` (left) and the components of the
/// `T_{π,c}`, `c ∈ C_s` (right).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GccGraph {
    pub string: usize,
    pub left_count: usize,
    /// `(color, component index in T_{π,c})` for each right vertex.
    pub right: Vec<(usize, usize)>,
    pub edges: Vec<GccEdge>,
}

impl GccGraph {
    /// Left vertices are `0..left_count`, right vertex `r` is `left_count + r`.
    pub fn multigraph(&self) -> Multigraph {
        Multigraph::new(
            self.left_count + self.right.len(),
            self.edges
                .iter()
                .map(|e| (e.left, self.left_count + e.right))
                .collect(),
        )
    }

    pub fn is_tree(&self) -> bool {
        self.multigraph().is_tree()
    }

    /// Index of the GCC edge for vertex `w` of `T_{π,c}`.
    pub fn edge_for(&self, color: usize, vertex: usize) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.color == color && e.vertex == vertex)
    }
}

/// Per-color data shared by the GCC graphs and the growth exponent.
#[derive(Debug, Clone)]
struct ColorPart {
    omega: Partition,
    quotient: DiGraph,
    components: Partition,
    leaf_count: usize,
}

/// Everything derived from one kernel tuple: the quotients `T_{π,c}`, their bridge data and
/// the graphs of colored components for every string.
#[derive(Debug, Clone)]
pub struct PiAnalysis {
    colors: Vec<ColorPart>,
    gccs: Vec<GccGraph>,
    exponent: GrowthExponent,
}

/// `Σ_s (#π_s − 1) + Σ_c #S_c (𝔣(T_{π,c})/2 − #V(T_{π,c}))`, with its split into
/// `#π_s − 1 + Σ_{c ∈ C_s} (𝔣(T_{π,c})/2 − #V(T_{π,c}))` per string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthExponent {
    pub total: Ratio<i64>,
    pub per_string: Vec<Ratio<i64>>,
}

impl PiAnalysis {
    pub fn gcc(&self, s: usize) -> &GccGraph {
        &self.gccs[s]
    }

    pub fn gccs(&self) -> &[GccGraph] {
        &self.gccs
    }

    pub fn all_trees(&self) -> bool {
        self.gccs.iter().all(GccGraph::is_tree)
    }

    pub fn exponent(&self) -> &GrowthExponent {
        &self.exponent
    }

    pub fn t_pi_c(&self, c: usize) -> &DiGraph {
        &self.colors[c].quotient
    }

    pub fn omega(&self, c: usize) -> &Partition {
        &self.colors[c].omega
    }

    pub fn leaf_count(&self, c: usize) -> usize {
        self.colors[c].leaf_count
    }

    pub fn component_count(&self, c: usize) -> usize {
        self.colors[c].components.block_count()
    }

    /// Whether `𝔣(T_{π,c}) = 2 #Comp(T_{π,c})` for every color.
    pub fn leaves_match_components(&self) -> bool {
        self.colors
            .iter()
            .all(|p| p.leaf_count == 2 * p.components.block_count())
    }

    /// Whether, for every string whose GCC is a tree, each `h_{s,c}` is injective on every
    /// component of `T_{π,c}`.
    pub fn tree_maps_injective(&self) -> bool {
        self.gccs.iter().filter(|g| g.is_tree()).all(|g| {
            let mut seen = std::collections::HashSet::new();
            g.edges.iter().all(|e| seen.insert((e.color, e.right, e.left)))
        })
    }
}

/// Computes the quotients, bridge data, GCC graphs and growth exponent for `π`.
/// Requires `π_s ≥ ρ_s` for every string.
pub fn analyze(t: &ColoredDigraph, pi: &MultiPartition, a: &StringAssignment) -> Result<PiAnalysis> {
    if !is_admissible(t, pi, a)? {
        return Err(Error::Precondition(format!(
            "{pi} does not dominate the string components"
        )));
    }
    analyze_unchecked(t, pi, a)
}

pub(crate) fn analyze_unchecked(
    t: &ColoredDigraph,
    pi: &MultiPartition,
    a: &StringAssignment,
) -> Result<PiAnalysis> {
    let colors = (0..a.color_count())
        .map(|c| {
            let (quotient, _) = t_pi_c(t, pi, a, c)?;
            let components = quotient.weak_components();
            let leaf_count = quotient.two_edge_decompose().leaf_count;
            Ok(ColorPart {
                omega: omega(pi, a, c)?,
                quotient,
                components,
                leaf_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gccs = (0..a.string_count())
        .map(|s| build_gcc(&colors, pi, a, s))
        .collect::<Vec<_>>();
    let per_string = (0..a.string_count())
        .map(|s| {
            let colored: Ratio<i64> = a
                .colors_of(s)
                .iter()
                .map(|&c| color_term(&colors[c]))
                .sum();
            Ratio::from_integer(pi.get(s).block_count() as i64 - 1) + colored
        })
        .collect::<Vec<_>>();
    let total = (0..a.string_count())
        .map(|s| Ratio::from_integer(pi.get(s).block_count() as i64 - 1))
        .sum::<Ratio<i64>>()
        + (0..a.color_count())
            .map(|c| color_term(&colors[c]) * Ratio::from_integer(a.strings_of(c).len() as i64))
            .sum::<Ratio<i64>>();
    Ok(PiAnalysis {
        colors,
        gccs,
        exponent: GrowthExponent { total, per_string },
    })
}

/// `𝔣(T_{π,c})/2 − #V(T_{π,c})`.
fn color_term(p: &ColorPart) -> Ratio<i64> {
    Ratio::new(p.leaf_count as i64, 2) - Ratio::from_integer(p.quotient.vertex_count() as i64)
}

fn build_gcc(colors: &[ColorPart], pi: &MultiPartition, a: &StringAssignment, s: usize) -> GccGraph {
    let p = pi.get(s);
    let mut right = Vec::new();
    let mut edges = Vec::new();
    for &c in a.colors_of(s) {
        let part = &colors[c];
        let base = right.len();
        right.extend((0..part.components.block_count()).map(|k| (c, k)));
        for (w, block) in part.omega.blocks().iter().enumerate() {
            edges.push(GccEdge {
                color: c,
                vertex: w,
                left: p.block_of(block[0]),
                right: base + part.components.block_of(w),
            });
        }
    }
    GccGraph {
        string: s,
        left_count: p.block_count(),
        right,
        edges,
    }
}

/// The graph of colored components for string `s`.
pub fn gcc(t: &ColoredDigraph, pi: &MultiPartition, a: &StringAssignment, s: usize) -> Result<GccGraph> {
    check_string(a, s)?;
    check_shape(t, pi, a)?;
    Ok(analyze_unchecked(t, pi, a)?.gccs.swap_remove(s))
}

pub fn growth_exponent(
    t: &ColoredDigraph,
    pi: &MultiPartition,
    a: &StringAssignment,
) -> Result<GrowthExponent> {
    Ok(analyze(t, pi, a)?.exponent)
}

/// A walk in a GCC graph: `vertices[i]` and `vertices[i+1]` are joined by `edges[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GccWalk {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

/// The walk in `GCC(T, π, s)` traced by a walk `edge_sequence` in `T`.
///
/// Position is tracked as a block of `π_s`. An edge whose color carries `s` crosses to the
/// component it lies in and back out at the block of its far endpoint; any other edge
/// must stay inside the current block.
pub fn induced_gcc_walk(
    t: &ColoredDigraph,
    pi: &MultiPartition,
    a: &StringAssignment,
    s: usize,
    edge_sequence: &[usize],
) -> Result<GccWalk> {
    if !is_admissible(t, pi, a)? {
        return Err(Error::Precondition(format!(
            "{pi} does not dominate the string components"
        )));
    }
    let g = gcc(t, pi, a, s)?;
    let p = pi.get(s);
    let Some(&first) = edge_sequence.first() else {
        return Ok(GccWalk {
            vertices: vec![],
            edges: vec![],
        });
    };
    if first >= t.edge_count() {
        return Err(Error::InvalidInput(format!("unknown edge {first}")));
    }
    let omegas = (0..a.color_count())
        .map(|c| {
            if a.strings_of(c).is_empty() {
                Ok(None)
            } else {
                omega(pi, a, c).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut here = p.block_of(t.graph().source(first));
    let mut walk = GccWalk {
        vertices: vec![here],
        edges: vec![],
    };
    for &e in edge_sequence {
        if e >= t.edge_count() {
            return Err(Error::InvalidInput(format!("unknown edge {e}")));
        }
        let (src, dst) = t.graph().edges()[e];
        let c = t.color(e);
        let (from, to) = if p.block_of(src) == here {
            (src, dst)
        } else if p.block_of(dst) == here {
            (dst, src)
        } else {
            return Err(Error::Precondition(format!(
                "edge {e} does not touch the current block"
            )));
        };
        if !a.incident(s, c) {
            if p.block_of(to) != here {
                return Err(Error::Precondition(format!(
                    "edge {e} leaves its block but its color avoids string {s}"
                )));
            }
            continue;
        }
        let w = omegas[c].as_ref().expect("incident color has strings");
        let out = g.edge_for(c, w.block_of(from)).expect("every vertex has an edge");
        let back = g.edge_for(c, w.block_of(to)).expect("every vertex has an edge");
        let comp = g.left_count + g.edges[out].right;
        debug_assert_eq!(g.edges[out].right, g.edges[back].right);
        here = p.block_of(to);
        walk.edges.extend([out, back]);
        walk.vertices.extend([comp, here]);
    }
    // Validate against the multigraph.
    let mg = g.multigraph();
    for (i, &e) in walk.edges.iter().enumerate() {
        let (x, y) = mg.edges[e];
        let (u, v) = (walk.vertices[i], walk.vertices[i + 1]);
        if !((x == u && y == v) || (x == v && y == u)) {
            return Err(Error::Precondition(format!("step {i} is not an edge of the GCC")));
        }
    }
    Ok(walk)
}

/// Number of tuples with `π_s ≥ ρ_s`: `∏_s Bell(#ρ_s)`.
pub fn admissible_count(rho: &[Partition]) -> u128 {
    rho.iter()
        .fold(1u128, |acc, r| acc.saturating_mul(bell_number(r.block_count())))
}

/// Every tuple with `π_s ≥ ρ_s`, the last string varying fastest.
pub fn admissible_tuples(
    t: &ColoredDigraph,
    a: &StringAssignment,
    guards: &Guards,
) -> Result<Vec<MultiPartition>> {
    let rho = rhos(t, a)?;
    guards.check(GuardKind::Partitions, admissible_count(&rho))?;
    let choices: Vec<Vec<Partition>> = rho.iter().map(|r| r.coarsenings().collect()).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; choices.len()];
    loop {
        out.push(MultiPartition(
            idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect(),
        ));
        let mut k = choices.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
